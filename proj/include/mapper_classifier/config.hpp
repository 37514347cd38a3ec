#pragma once

// Run configuration: an INI file (`key = value` lines under [section]
// headers). Relative paths resolve against the directory of the file.

#include "mapper_classifier/common.hpp"
#include "mapper_classifier/filter_bank.hpp"
#include "mapper_classifier/knn_embed.hpp"
#include "mapper_classifier/mapper.hpp"
#include "mapper_classifier/mlp.hpp"
#include "mapper_classifier/noise.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mc {

struct RunConfig {
  // [data]
  std::string train_images, train_labels, test_images, test_labels;
  std::string dataset_name = "mnist";
  std::size_t train_size = 10000;  // 0: the whole training file
  std::size_t test_size = 0;       // 0: the whole test file
  std::uint64_t subset_seed = 1;
  std::uint64_t test_seed = 2;
  // [splits]
  int n_splits = 1;
  std::uint64_t split_seed = 3;
  // [filter]
  FilterKind filter = FilterKind::pca;
  std::size_t n_components = 20;
  std::string latents;       // external: latent matrix of the training split
  std::string test_latents;  // external: latent matrix of the test set
  // [mapper], [embed]
  MapperParams mapper;
  GPrimeParams gprime;
  // [classifier]
  TrainConfig train;
  MlpShape shape;
  // [robust]
  std::vector<NoiseModel> noise_models{NoiseModel::blur, NoiseModel::gaussian, NoiseModel::salt_pepper};
  std::vector<double> lambdas{0.01, 0.02, 0.03, 0.04, 0.05, 0.06};
  std::uint64_t noise_seed = 5;
  std::size_t robust_limit = 0;  // 0: every initially correct test example
  // [run]
  std::string output_dir = "mc_out";
  int workers = 1;

  void validate() const {
    require(!train_images.empty() && !train_labels.empty(), "config: [data] train_images and train_labels are required");
    require(n_splits >= 1, "config: [splits] n must be at least 1");
    require(n_components >= 1, "config: [filter] n_components must be at least 1");
    require(mapper.n_int >= 1, "config: [mapper] n_int must be at least 1");
    require(mapper.n_bins >= 1, "config: [mapper] n_bins must be at least 1");
    require(mapper.gain > 0 && mapper.gain < 0.5, "config: [mapper] gain must lie in (0, 0.5)");
    require(workers >= 1, "config: [run] workers must be at least 1");
    if (filter == FilterKind::external) {
      require(!latents.empty(), "config: [filter] kind = external needs a latents file");
      require(n_splits == 1, "config: external latents are supported for a single split only");
    }
    for (double l : lambdas) require(std::isfinite(l) && l >= 0, "config: [robust] lambdas must be non-negative");
    gprime.validate();
    train.validate();
  }
};

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& key) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) throw Error("config: empty list entry in " + key);
    const auto e = item.find_last_not_of(" \t");
    std::istringstream is(item.substr(b, e - b + 1));
    T v{};
    is >> v;
    if (!is || !is.eof()) throw Error("config: bad list entry '" + item + "' for " + key);
    out.push_back(v);
  }
  return out;
}

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  const std::filesystem::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

}  // namespace detail

/// Parses an INI stream. Unknown sections or keys are errors so typos do
/// not silently fall back to defaults.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("config: ") + e.what());
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"data", {"train_images", "train_labels", "test_images", "test_labels", "name", "train_size", "test_size",
                "subset_seed", "test_seed"}},
      {"splits", {"n", "seed"}},
      {"filter", {"kind", "n_components", "latents", "test_latents"}},
      {"mapper", {"n_int", "n_bins", "gain"}},
      {"embed", {"k", "delta", "eta"}},
      {"classifier", {"epochs", "batch_size", "learning_rate", "momentum", "seed", "hidden", "dropout"}},
      {"robust", {"models", "lambdas", "seed", "limit"}},
      {"run", {"output_dir", "workers"}}};
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw Error("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw Error("config: key '" + section + "' outside any section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw Error("config: unknown key '" + key + "' in [" + section + "]");
  }

  const auto get = [&](const std::string& path, auto fallback) {
    using T = decltype(fallback);
    if (!tree.get_optional<std::string>(path)) return fallback;
    try {
      return tree.get<T>(path);
    } catch (const pt::ptree_bad_data&) {
      throw Error("config: cannot parse value '" + tree.get<std::string>(path) + "' of " + path);
    }
  };
  const auto path_of = [&](const std::string& key) {
    return detail::resolve(base_dir, tree.get<std::string>(key, ""));
  };

  RunConfig c;
  c.train_images = path_of("data.train_images");
  c.train_labels = path_of("data.train_labels");
  c.test_images = path_of("data.test_images");
  c.test_labels = path_of("data.test_labels");
  c.dataset_name = get("data.name", c.dataset_name);
  c.train_size = get("data.train_size", c.train_size);
  c.test_size = get("data.test_size", c.test_size);
  c.subset_seed = get("data.subset_seed", c.subset_seed);
  c.test_seed = get("data.test_seed", c.test_seed);

  c.n_splits = get("splits.n", c.n_splits);
  c.split_seed = get("splits.seed", c.split_seed);

  const auto kind = get("filter.kind", std::string("pca"));
  if (kind == "pca") c.filter = FilterKind::pca;
  else if (kind == "external") c.filter = FilterKind::external;
  else throw Error("config: [filter] kind must be pca or external, got '" + kind + "'");
  c.n_components = get("filter.n_components", c.n_components);
  c.latents = path_of("filter.latents");
  c.test_latents = path_of("filter.test_latents");

  c.mapper.n_int = get("mapper.n_int", c.mapper.n_int);
  c.mapper.n_bins = get("mapper.n_bins", c.mapper.n_bins);
  c.mapper.gain = get("mapper.gain", c.mapper.gain);

  c.gprime.k = get("embed.k", c.gprime.k);
  c.gprime.delta = get("embed.delta", c.gprime.delta);
  c.gprime.eta = get("embed.eta", c.gprime.eta);

  c.train.epochs = get("classifier.epochs", c.train.epochs);
  c.train.batch_size = get("classifier.batch_size", c.train.batch_size);
  c.train.learning_rate = get("classifier.learning_rate", c.train.learning_rate);
  c.train.momentum = get("classifier.momentum", c.train.momentum);
  c.train.seed = get("classifier.seed", c.train.seed);
  c.shape.dropout = get("classifier.dropout", c.shape.dropout);
  if (auto h = tree.get_optional<std::string>("classifier.hidden"))
    c.shape.hidden = detail::parse_list<int>(*h, "classifier.hidden");

  if (auto m = tree.get_optional<std::string>("robust.models")) {
    c.noise_models.clear();
    for (const auto& name : detail::parse_list<std::string>(*m, "robust.models"))
      c.noise_models.push_back(parse_noise_model(name));
  }
  if (auto l = tree.get_optional<std::string>("robust.lambdas"))
    c.lambdas = detail::parse_list<double>(*l, "robust.lambdas");
  c.noise_seed = get("robust.seed", c.noise_seed);
  c.robust_limit = get("robust.limit", c.robust_limit);

  c.output_dir = detail::resolve(base_dir, get("run.output_dir", c.output_dir));
  c.workers = get("run.workers", c.workers);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  return parse_config(in, std::filesystem::path(path).parent_path());
}

}  // namespace mc
