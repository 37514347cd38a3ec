#pragma once

// Noise sweeps over initially-correct test examples and the normalized
// accuracy curve a(x) = 1 - misclassified((0, x]) / initial_correct.

#include "mapper_classifier/common.hpp"
#include "mapper_classifier/dataset.hpp"
#include "mapper_classifier/noise.hpp"

#include <algorithm>
#include <concepts>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mc {

/// Anything that labels a batch of flattened images.
template <class C>
concept Classifier = requires(const C& c, const RowMatrix& x) {
  { c.predict(x) } -> std::convertible_to<std::vector<int>>;
};

struct RobustnessRecord {
  std::size_t test_index = 0;  // row in the test set
  NoiseModel model = NoiseModel::blur;
  double lambda = 0.0;
  double l2 = 0.0;
  int true_label = 0;
  int predicted_label = 0;
  bool correct = false;
};

struct AccuracyCurve {
  std::vector<double> thresholds;  // ascending
  std::vector<double> accuracy;    // a(x) per threshold
  std::size_t initial_correct = 0;
};

struct InitialResult {
  std::vector<std::size_t> correct;  // test rows classified correctly without noise
  std::size_t initial_correct = 0;
  double accuracy = 0.0;
  std::vector<int> predictions;
};

template <Classifier C>
InitialResult initial_filter(const C& classifier, const Dataset& test) {
  InitialResult r;
  r.predictions = classifier.predict(test.images);
  require(r.predictions.size() == test.size(), "initial_filter: classifier returned the wrong number of labels");
  for (std::size_t i = 0; i < test.size(); ++i)
    if (r.predictions[i] == test.labels[i]) r.correct.push_back(i);
  r.initial_correct = r.correct.size();
  r.accuracy = test.size() == 0 ? 0.0 : static_cast<double>(r.initial_correct) / static_cast<double>(test.size());
  return r;
}

/// One perturbation per (example, lambda); each record has its own random
/// stream derived from (seed, model, example, lambda index).
template <Classifier C>
std::vector<RobustnessRecord> sweep(const C& classifier, const Dataset& test, const std::vector<std::size_t>& subset,
                                    NoiseModel model, const std::vector<double>& lambdas, std::uint64_t seed,
                                    std::size_t chunk = 512) {
  std::vector<RobustnessRecord> records;
  if (subset.empty() || lambdas.empty()) return records;
  for (std::size_t s0 = 0; s0 < subset.size(); s0 += chunk) {
    const std::size_t s1 = std::min(subset.size(), s0 + chunk);
    RowMatrix batch(static_cast<Eigen::Index>((s1 - s0) * lambdas.size()), test.images.cols());
    const std::size_t first = records.size();
    Eigen::Index row = 0;
    for (std::size_t s = s0; s < s1; ++s) {
      const std::size_t i = subset[s];
      require(i < test.size(), "sweep: subset index out of range");
      const Vector img = test.images.row(static_cast<Eigen::Index>(i)).transpose();
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        const NoiseSpec spec{model, lambdas[li], derive_seed(seed, static_cast<std::uint64_t>(model) + 1, i, li)};
        const PerturbedImage p = perturb(img, spec, test.height, test.width);
        batch.row(row++) = p.pixels.transpose();
        RobustnessRecord r;
        r.test_index = i;
        r.model = model;
        r.lambda = lambdas[li];
        r.l2 = p.l2;
        r.true_label = test.labels[i];
        records.push_back(r);
      }
    }
    const auto pred = classifier.predict(batch);
    require(pred.size() == records.size() - first, "sweep: classifier returned the wrong number of labels");
    for (std::size_t r = 0; r < pred.size(); ++r) {
      records[first + r].predicted_label = pred[r];
      records[first + r].correct = pred[r] == records[first + r].true_label;
    }
  }
  return records;
}

/// Exact empirical thresholds: 0 followed by every distinct positive l2.
inline std::vector<double> l2_thresholds(const std::vector<RobustnessRecord>& records) {
  std::set<double> s{0.0};
  for (const auto& r : records)
    if (r.l2 > 0.0) s.insert(r.l2);
  return {s.begin(), s.end()};
}

/// a(x) for each threshold x: an example counts as misclassified at x when
/// any of its perturbations with l2 in (0, x] was misclassified.
inline AccuracyCurve curve(const std::vector<RobustnessRecord>& records, std::vector<double> thresholds,
                           std::size_t initial_correct) {
  require(initial_correct > 0, "curve: no initially correct examples to normalise by");
  std::sort(thresholds.begin(), thresholds.end());
  // Earliest l2 at which each example is first fooled.
  std::vector<std::pair<std::size_t, double>> first;
  {
    std::vector<RobustnessRecord> wrong;
    for (const auto& r : records)
      if (!r.correct && r.l2 > 0.0) wrong.push_back(r);
    std::sort(wrong.begin(), wrong.end(), [](const auto& a, const auto& b) {
      return a.test_index < b.test_index || (a.test_index == b.test_index && a.l2 < b.l2);
    });
    for (const auto& r : wrong)
      if (first.empty() || first.back().first != r.test_index) first.emplace_back(r.test_index, r.l2);
  }
  std::vector<double> fooled_at;
  for (const auto& f : first) fooled_at.push_back(f.second);
  std::sort(fooled_at.begin(), fooled_at.end());

  AccuracyCurve c;
  c.initial_correct = initial_correct;
  c.thresholds = thresholds;
  std::size_t count = 0;
  for (double x : thresholds) {
    while (count < fooled_at.size() && fooled_at[count] <= x) ++count;
    c.accuracy.push_back(1.0 - static_cast<double>(count) / static_cast<double>(initial_correct));
  }
  return c;
}

inline AccuracyCurve curve(const std::vector<RobustnessRecord>& records, std::size_t initial_correct) {
  return curve(records, l2_thresholds(records), initial_correct);
}

/// CSV with header `threshold_l2,normalized_accuracy,model,dataset,classifier`.
inline std::string curve_csv(const AccuracyCurve& c, const std::string& model, const std::string& dataset,
                             const std::string& classifier) {
  std::ostringstream out;
  out << "threshold_l2,normalized_accuracy,model,dataset,classifier\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < c.thresholds.size(); ++i)
    out << c.thresholds[i] << ',' << c.accuracy[i] << ',' << model << ',' << dataset << ',' << classifier << '\n';
  return out.str();
}

inline void emit(const AccuracyCurve& c, const std::string& path, const std::string& model,
                 const std::string& dataset, const std::string& classifier) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create " + path);
  out << curve_csv(c, model, dataset, classifier);
  if (!out) throw Error("short write to " + path);
}

}  // namespace mc
