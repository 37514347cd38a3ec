#pragma once

// End-to-end Mapper classifier: committees per split, block training
// matrix, MLP on top, and g' embedding of unseen points at prediction time.

#include "mapper_classifier/archive.hpp"
#include "mapper_classifier/committee.hpp"
#include "mapper_classifier/config.hpp"
#include "mapper_classifier/dataset.hpp"
#include "mapper_classifier/filter_bank.hpp"
#include "mapper_classifier/knn_embed.hpp"
#include "mapper_classifier/mlp.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mc {

using Logger = std::function<void(const std::string&)>;

class MapperClassifier {
 public:
  std::vector<Committee> committees;
  GPrimeParams gprime;
  Mlp<float> net;
  int workers = 1;
  Eigen::Index chunk = 2000;

  std::size_t width() const { return block_offsets(committees).back(); }

  /// Concatenated g' embeddings of `x` under every committee. `fvals`, when
  /// given, supplies each committee's filter values for the rows of `x`
  /// (needed for external banks, which cannot project new points).
  RowMatrix embed(const RowMatrix& x, const std::vector<RowMatrix>* fvals = nullptr) const {
    const auto off = block_offsets(committees);
    RowMatrix out(x.rows(), static_cast<Eigen::Index>(off.back()));
    for (std::size_t i = 0; i < committees.size(); ++i) {
      const RowMatrix fv = fvals ? fvals->at(i) : committee_filter_values(committees[i], x);
      out.middleCols(static_cast<Eigen::Index>(off[i]), static_cast<Eigen::Index>(committees[i].width())) =
          g_prime_matrix(committees[i], x, fv, gprime, workers);
    }
    return out;
  }

  std::vector<int> predict(const RowMatrix& x) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += chunk) {
      const Eigen::Index nr = std::min(chunk, x.rows() - r0);
      const auto part = net.predict(embed(x.middleRows(r0, nr)));
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }

  std::vector<int> predict_embedded(const RowMatrix& embedding) const { return net.predict(embedding); }
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// The training subset named by the config (rows keep their file index in
/// `source_index`).
inline Dataset load_training_subset(const RunConfig& cfg) {
  Dataset full = load_idx(cfg.train_images, cfg.train_labels);
  full.name = cfg.dataset_name;
  if (cfg.train_size == 0 || cfg.train_size == full.size()) {
    full.source_index.resize(full.size());
    std::iota(full.source_index.begin(), full.source_index.end(), std::size_t{0});
    return full;
  }
  return random_subset(full, cfg.train_size, cfg.subset_seed);
}

inline Dataset load_test_subset(const RunConfig& cfg) {
  require(!cfg.test_images.empty() && !cfg.test_labels.empty(),
          "config: [data] test_images and test_labels are required for evaluation");
  Dataset full = load_idx(cfg.test_images, cfg.test_labels);
  full.name = cfg.dataset_name;
  if (cfg.test_size == 0 || cfg.test_size == full.size()) {
    full.source_index.resize(full.size());
    std::iota(full.source_index.begin(), full.source_index.end(), std::size_t{0});
    return full;
  }
  return random_subset(full, cfg.test_size, cfg.test_seed);
}

struct TrainOutput {
  MapperClassifier model;
  CommitteeArchive archive;
  RowMatrix block;            // training matrix, rows in split order
  std::vector<int> labels;    // aligned with `block`
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
  double mapper_seconds = 0.0;
  double embed_seconds = 0.0;
  double classifier_seconds = 0.0;
};

/// Committees, block matrix and classifier for an already-loaded training set.
inline TrainOutput train_pipeline(const RunConfig& cfg, const Dataset& data, const Logger& log = {}) {
  cfg.validate();
  const auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  TrainOutput out;
  out.model.gprime = cfg.gprime;
  out.model.workers = cfg.workers;
  out.archive.params = cfg.mapper;

  const SplitPlan plan = make_splits(data, cfg.n_splits, cfg.split_seed);
  std::vector<std::shared_ptr<const RowMatrix>> split_points;
  std::vector<std::vector<std::size_t>> members;
  for (int s = 0; s < plan.n; ++s) {
    members.push_back(plan.members(s));
    auto pts = std::make_shared<RowMatrix>(static_cast<Eigen::Index>(members.back().size()), data.images.cols());
    for (std::size_t r = 0; r < members.back().size(); ++r)
      pts->row(static_cast<Eigen::Index>(r)) = data.images.row(static_cast<Eigen::Index>(members.back()[r]));
    split_points.push_back(std::move(pts));
  }

  auto t0 = std::chrono::steady_clock::now();
  auto& committees = out.model.committees;
  committees.resize(static_cast<std::size_t>(plan.n));
  for (int s = 0; s < plan.n; ++s) {
    const auto& pts = split_points[static_cast<std::size_t>(s)];
    FilterBank bank;
    RowMatrix fv;
    if (cfg.filter == FilterKind::pca) {
      bank = fit_pca(*pts, cfg.n_components, s);
      fv = apply(bank, *pts);
    } else {
      bank = load_external(cfg.latents, static_cast<std::size_t>(pts->rows()), s);
      fv = bank.values;
    }
    committees[static_cast<std::size_t>(s)] = build_committee(pts, fv, std::move(bank), cfg.mapper, s, cfg.workers);
    std::vector<std::size_t> rows;
    for (std::size_t m : members[static_cast<std::size_t>(s)]) rows.push_back(data.source_index.at(m));
    out.archive.source_rows.push_back(std::move(rows));
    say("split " + std::to_string(s) + ": " + std::to_string(pts->rows()) + " points, " +
        std::to_string(committees[static_cast<std::size_t>(s)].width()) + " vertices");
  }
  out.mapper_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const GPrimeParams gp = cfg.gprime;
  const int workers = cfg.workers;
  out.block = assemble_block_matrix(split_points, committees, [&](const Committee& c, const RowMatrix& pts) {
    return g_prime_matrix(c, pts, committee_filter_values(c, pts), gp, workers);
  });
  for (const auto& m : members)
    for (std::size_t i : m) out.labels.push_back(data.labels[i]);
  out.embed_seconds = seconds_since(t0);
  say("block matrix: " + std::to_string(out.block.rows()) + " x " + std::to_string(out.block.cols()));

  t0 = std::chrono::steady_clock::now();
  auto trained = train<float>(out.block, out.labels, cfg.train, cfg.shape, [&](int epoch, double loss) {
    say("epoch " + std::to_string(epoch) + " loss " + std::to_string(loss));
  });
  out.model.net = std::move(trained.net);
  out.epoch_loss = std::move(trained.epoch_loss);
  out.classifier_seconds = seconds_since(t0);

  const auto pred = out.model.predict_embedded(out.block);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == out.labels[i];
  out.train_accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());

  out.archive.committees = committees;
  for (auto& c : out.archive.committees) c.points.reset();
  out.archive.meta = {{"dataset", cfg.dataset_name},
                      {"train_images", cfg.train_images},
                      {"train_size", data.size()},
                      {"subset_seed", cfg.subset_seed},
                      {"split_seed", cfg.split_seed},
                      {"filter", to_string(cfg.filter)},
                      {"n_components", cfg.n_components}};
  return out;
}

/// Fraction of rows where `pred` equals `labels`.
inline double accuracy(const std::vector<int>& pred, const std::vector<int>& labels) {
  require(pred.size() == labels.size() && !labels.empty(), "accuracy: prediction and label counts differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// Reattaches the training pixels of each archived split, read from the
/// training file named in the config.
inline std::vector<Committee> restore_committees(const CommitteeArchive& archive, const Dataset& train_file) {
  std::vector<Committee> out = archive.committees;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& rows = archive.source_rows[i];
    auto pts = std::make_shared<RowMatrix>(static_cast<Eigen::Index>(rows.size()), train_file.images.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      require(rows[r] < train_file.size(), "archive refers to training row " + std::to_string(rows[r]) +
                                               " beyond the training file");
      pts->row(static_cast<Eigen::Index>(r)) = train_file.images.row(static_cast<Eigen::Index>(rows[r]));
    }
    out[i].attach_points(std::move(pts));
  }
  return out;
}

}  // namespace mc
