#pragma once

// Persistence for the pipeline stages: committee archive (JSON), embedding
// matrix (binary) and Mapper graph exports (DOT / JSON).

#include "mapper_classifier/committee.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace mc {

using nlohmann::json;

inline json eigen_rows_to_json(const RowMatrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline RowMatrix eigen_rows_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  RowMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("archive: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

inline json to_json(const Cover& c) {
  json iv = json::array();
  for (const auto& i : c.intervals) iv.push_back({i.lo, i.hi});
  return {{"n_int", c.n_int}, {"gain", c.gain}, {"min", c.min}, {"max", c.max},
          {"degenerate", c.degenerate}, {"intervals", iv}};
}

inline Cover cover_from_json(const json& j) {
  Cover c;
  c.n_int = j.at("n_int").get<int>();
  c.gain = j.at("gain").get<double>();
  c.min = j.at("min").get<double>();
  c.max = j.at("max").get<double>();
  c.degenerate = j.at("degenerate").get<bool>();
  for (const auto& iv : j.at("intervals")) c.intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  return c;
}

inline json to_json(const MapperGraph& g) {
  json vertices = json::array();
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    const auto& mv = g.vertices[v];
    vertices.push_back({{"id", v},
                        {"interval", mv.interval_index},
                        {"cluster", mv.cluster_index},
                        {"mean_filter", mv.mean_filter},
                        {"members", mv.members}});
  }
  json edges = json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  json hists = json::array();
  for (const auto& h : g.histograms)
    hists.push_back({{"bin_edges", h.bin_edges}, {"counts", h.counts}, {"cutoff", h.cutoff}});
  return {{"filter_id", g.filter_id}, {"n_points", g.n_points}, {"cover", to_json(g.cover)},
          {"epsilons", g.epsilons},   {"histograms", hists},   {"vertices", vertices},
          {"edges", edges}};
}

inline MapperGraph graph_from_json(const json& j) {
  MapperGraph g;
  g.filter_id = j.at("filter_id").get<int>();
  g.n_points = j.at("n_points").get<std::size_t>();
  g.cover = cover_from_json(j.at("cover"));
  g.epsilons = j.at("epsilons").get<std::vector<double>>();
  for (const auto& h : j.at("histograms")) {
    MergeHistogram mh;
    mh.bin_edges = h.at("bin_edges").get<std::vector<double>>();
    mh.counts = h.at("counts").get<std::vector<std::size_t>>();
    mh.cutoff = h.at("cutoff").get<double>();
    g.histograms.push_back(std::move(mh));
  }
  for (const auto& v : j.at("vertices")) {
    MapperVertex mv;
    mv.interval_index = v.at("interval").get<int>();
    mv.cluster_index = v.at("cluster").get<int>();
    mv.mean_filter = v.at("mean_filter").get<double>();
    mv.members = v.at("members").get<std::vector<PointId>>();
    g.vertices.push_back(std::move(mv));
  }
  for (const auto& e : j.at("edges")) g.edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  g.rebuild_index();
  return g;
}

inline json to_json(const FilterBank& b) {
  json j{{"kind", to_string(b.kind)}, {"split_id", b.split_id}};
  if (b.kind == FilterKind::pca) {
    j["mean"] = std::vector<double>(b.mean.data(), b.mean.data() + b.mean.size());
    j["variances"] = std::vector<double>(b.variances.data(), b.variances.data() + b.variances.size());
    j["components"] = eigen_rows_to_json(b.components);
  } else {
    j["values"] = eigen_rows_to_json(b.values);
  }
  return j;
}

inline FilterBank bank_from_json(const json& j) {
  FilterBank b;
  const auto kind = j.at("kind").get<std::string>();
  b.split_id = j.at("split_id").get<int>();
  if (kind == "pca") {
    b.kind = FilterKind::pca;
    const auto mean = j.at("mean").get<std::vector<double>>();
    b.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    const auto var = j.at("variances").get<std::vector<double>>();
    b.variances = Eigen::Map<const Vector>(var.data(), static_cast<Eigen::Index>(var.size()));
    b.components = eigen_rows_from_json(j.at("components"));
  } else if (kind == "external") {
    b.kind = FilterKind::external;
    b.values = eigen_rows_from_json(j.at("values"));
  } else {
    throw Error("archive: unknown filter kind '" + kind + "'");
  }
  return b;
}

/// A committee archive: everything but the training pixels, which are
/// referenced by their row in the source dataset.
struct CommitteeArchive {
  std::vector<Committee> committees;
  std::vector<std::vector<std::size_t>> source_rows;  // per split: dataset rows of its points
  MapperParams params;
  json meta = json::object();
};

inline json to_json(const CommitteeArchive& a) {
  json cs = json::array();
  for (std::size_t i = 0; i < a.committees.size(); ++i) {
    const auto& c = a.committees[i];
    json graphs = json::array();
    for (const auto& g : c.graphs) graphs.push_back(to_json(g));
    cs.push_back({{"split_id", c.split_id},
                  {"source_rows", a.source_rows.at(i)},
                  {"offsets", c.offsets},
                  {"bank", to_json(c.bank)},
                  {"graphs", graphs}});
  }
  return {{"format", "mapper-committee-archive"},
          {"version", 1},
          {"params", {{"n_int", a.params.n_int}, {"n_bins", a.params.n_bins}, {"gain", a.params.gain}}},
          {"meta", a.meta},
          {"committees", cs}};
}

inline CommitteeArchive archive_from_json(const json& j) {
  if (j.value("format", "") != "mapper-committee-archive") throw Error("not a committee archive");
  if (j.value("version", 0) != 1) throw Error("unsupported committee archive version");
  CommitteeArchive a;
  const auto& p = j.at("params");
  a.params = {p.at("n_int").get<int>(), p.at("n_bins").get<int>(), p.at("gain").get<double>()};
  a.meta = j.value("meta", json::object());
  for (const auto& cj : j.at("committees")) {
    Committee c;
    c.split_id = cj.at("split_id").get<int>();
    c.bank = bank_from_json(cj.at("bank"));
    for (const auto& gj : cj.at("graphs")) c.graphs.push_back(graph_from_json(gj));
    c.rebuild_offsets();
    if (c.offsets != cj.at("offsets").get<std::vector<std::size_t>>())
      throw Error("archive: stored offsets disagree with the graphs' vertex counts");
    a.source_rows.push_back(cj.at("source_rows").get<std::vector<std::size_t>>());
    if (a.source_rows.back().size() != c.n_points()) throw Error("archive: split size disagrees with its graphs");
    a.committees.push_back(std::move(c));
  }
  return a;
}

inline void save_archive(const CommitteeArchive& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot create " + path);
  out << to_json(a).dump();
  if (!out) throw Error("short write to " + path);
}

inline CommitteeArchive load_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open committee archive " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  try {
    return archive_from_json(j);
  } catch (const json::exception& e) {
    throw Error(path + ": malformed archive: " + e.what());
  }
}

// Embedding matrix file: "MCEMB1\0\0", u64 rows, u64 cols, row-major f64
// values, then `rows` i32 labels.
inline void save_embedding(const RowMatrix& m, const std::vector<int>& labels, const std::string& path) {
  require(labels.size() == static_cast<std::size_t>(m.rows()), "save_embedding: labels and rows differ");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot create " + path);
  const char magic[8] = {'M', 'C', 'E', 'M', 'B', '1', '\0', '\0'};
  out.write(magic, 8);
  const std::uint64_t rows = static_cast<std::uint64_t>(m.rows()), cols = static_cast<std::uint64_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  for (int l : labels) {
    const std::int32_t v = l;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  if (!out) throw Error("short write to " + path);
}

inline std::pair<RowMatrix, std::vector<int>> load_embedding(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "MCEMB1\0\0", 8) != 0) throw Error(path + ": not an embedding matrix file");
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 8);
  in.read(reinterpret_cast<char*>(&cols), 8);
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  std::vector<int> labels(rows);
  for (auto& l : labels) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    l = v;
  }
  if (!in) throw Error(path + ": truncated embedding matrix");
  return {std::move(m), std::move(labels)};
}

enum class GraphFormat { dot, json };

inline GraphFormat parse_graph_format(const std::string& s) {
  if (s == "dot") return GraphFormat::dot;
  if (s == "json") return GraphFormat::json;
  throw Error("unknown graph format '" + s + "' (expected dot or json)");
}

/// DOT: node `size` is the member count, `color` encodes the mean filter
/// value on a blue (low) to red (high) scale; JSON: the archive form.
inline std::string export_graph(const MapperGraph& g, GraphFormat format) {
  if (format == GraphFormat::json) return to_json(g).dump(2) + "\n";
  std::ostringstream out;
  out << std::setprecision(10);
  out << "graph mapper_filter_" << g.filter_id << " {\n";
  out << "  node [shape=circle, style=filled];\n";
  std::size_t biggest = 1;
  for (const auto& v : g.vertices) biggest = std::max(biggest, v.members.size());
  const double span = g.cover.max - g.cover.min;
  for (std::size_t i = 0; i < g.vertices.size(); ++i) {
    const auto& v = g.vertices[i];
    const double t = span > 0 ? std::clamp((v.mean_filter - g.cover.min) / span, 0.0, 1.0) : 0.5;
    const double hue = 0.667 * (1.0 - t);
    const double width = 0.2 + 0.8 * std::sqrt(static_cast<double>(v.members.size()) / static_cast<double>(biggest));
    out << "  v" << i << " [label=\"" << v.interval_index << ":" << v.cluster_index << "\", size=" << v.members.size()
        << ", width=" << width << ", mean_filter=" << v.mean_filter << ", color=\"" << std::fixed
        << std::setprecision(3) << hue << " 0.850 0.950\"];\n"
        << std::defaultfloat << std::setprecision(10);
  }
  for (const auto& [a, b] : g.edges) out << "  v" << a << " -- v" << b << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace mc
