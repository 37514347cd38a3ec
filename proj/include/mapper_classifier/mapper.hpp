#pragma once

// Mapper for a single real-valued filter: an overlapping interval cover of
// the filter's range, single-linkage refinement of each preimage with a
// histogram-selected scale, and the nerve (1-skeleton) of the refined cover.

#include "mapper_classifier/common.hpp"
#include "mapper_classifier/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace mc {

struct MapperParams {
  int n_int = 10;
  int n_bins = 10;
  double gain = 0.33;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double mid() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
  bool contains(double v) const { return lo <= v && v <= hi; }
};

/// Overlapping cover of [min f, max f] by `n_int` equal-length intervals.
struct Cover {
  std::vector<Interval> intervals;
  int n_int = 0;
  double gain = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;  // zero-range filter: one interval [min, min]

  double length() const { return intervals.empty() ? 0.0 : intervals.front().hi - intervals.front().lo; }
};

/// Interval length L solves n*L - (n-1)*gain*L = max - min; consecutive
/// intervals overlap by gain*L. Endpoints are included.
inline Cover build_cover(std::span<const double> values, int n_int, double gain) {
  require(!values.empty(), "build_cover: no filter values");
  require(n_int >= 1, "build_cover: n_int must be at least 1");
  require(gain > 0.0 && gain < 0.5, "build_cover: gain must lie in (0, 0.5)");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  Cover c;
  c.n_int = n_int;
  c.gain = gain;
  c.min = *lo_it;
  c.max = *hi_it;
  if (!(c.max > c.min)) {
    c.degenerate = true;
    c.n_int = 1;
    c.intervals.push_back({c.min, c.max});
    return c;
  }
  const double range = c.max - c.min;
  const double len = range / (n_int - (n_int - 1) * gain);
  const double step = len * (1.0 - gain);
  for (int a = 0; a < n_int; ++a) {
    Interval iv{c.min + a * step, c.min + a * step + len};
    if (a == 0) iv.lo = c.min;
    if (a == n_int - 1) iv.hi = c.max;
    c.intervals.push_back(iv);
  }
  return c;
}

/// Indices of the cover intervals containing `v`.
inline std::vector<int> intervals_containing(const Cover& c, double v) {
  std::vector<int> out;
  for (int a = 0; a < static_cast<int>(c.intervals.size()); ++a)
    if (c.intervals[static_cast<std::size_t>(a)].contains(v)) out.push_back(a);
  return out;
}

/// Histogram of single-linkage merge distances over [0, max merge].
struct MergeHistogram {
  std::vector<double> bin_edges;      // n_bins + 1
  std::vector<std::size_t> counts;    // n_bins
  double cutoff = 0.0;                // selected epsilon

  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
};

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double w = 0.0;
};

/// Euclidean minimum spanning tree by Prim's algorithm. Its edge weights are
/// exactly the merge heights of the single-linkage dendrogram.
/// `row(u)` must return a pointer to the n distances from point u.
template <class RowFn>
std::vector<WeightedEdge> prim_mst(std::size_t n, RowFn&& row) {
  std::vector<WeightedEdge> edges;
  if (n < 2) return edges;
  edges.reserve(n - 1);
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, inf);
  std::vector<std::size_t> parent(n, 0);
  std::vector<char> done(n, 0);
  std::size_t u = 0;
  for (std::size_t it = 0; it < n; ++it) {
    done[u] = 1;
    if (it > 0) edges.push_back({parent[u], u, best[u]});
    const double* du = row(u);
    std::size_t next = n;
    double next_d = inf;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      if (du[v] < best[v]) {
        best[v] = du[v];
        parent[v] = u;
      }
      if (best[v] < next_d || next == n) {
        next_d = best[v];
        next = v;
      }
    }
    if (next == n) break;
    u = next;
  }
  return edges;
}

/// MST of the rows of `points`.
inline std::vector<WeightedEdge> euclidean_mst(const RowMatrix& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  // Dense distance matrix up to ~800 MB; beyond that rows are recomputed.
  if (n <= 10'000) {
    const Eigen::MatrixXd dist = pairwise_distances(points);
    return prim_mst(n, [&](std::size_t u) { return dist.col(static_cast<Eigen::Index>(u)).data(); });
  }
  Vector buf(static_cast<Eigen::Index>(n));
  return prim_mst(n, [&](std::size_t u) {
    buf = (points.rowwise() - points.row(static_cast<Eigen::Index>(u))).rowwise().norm();
    return buf.data();
  });
}

/// Bins merge distances uniformly over [0, max]. Each distance lands in
/// the bin [e_i, e_{i+1}) bracketing it; the last bin is closed.
inline MergeHistogram histogram_of_merges(std::span<const double> merges, int n_bins);
inline double select_epsilon(const MergeHistogram& h);

inline MergeHistogram histogram_of_merges(std::span<const double> merges, int n_bins) {
  require(n_bins >= 1, "merge histogram needs at least one bin");
  MergeHistogram h;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  const double top = merges.empty() ? 0.0 : *std::max_element(merges.begin(), merges.end());
  h.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int i = 0; i <= n_bins; ++i) h.bin_edges[static_cast<std::size_t>(i)] = top * i / n_bins;
  h.bin_edges.back() = top;
  for (double d : merges) {
    auto it = std::upper_bound(h.bin_edges.begin(), h.bin_edges.end() - 1, d);
    auto bin = static_cast<std::size_t>(std::distance(h.bin_edges.begin(), it));
    bin = std::clamp<std::size_t>(bin == 0 ? 0 : bin - 1, 0, h.counts.size() - 1);
    ++h.counts[bin];
  }
  h.cutoff = select_epsilon(h);
  return h;
}

/// True when some empty bin follows a non-empty one.
inline bool has_break(const MergeHistogram& h) {
  bool seen = false;
  for (std::size_t c : h.counts) {
    if (c > 0) seen = true;
    else if (seen) return true;
  }
  return false;
}

/// Left edge of the first empty bin after a non-empty bin; the right edge
/// of the last bin when there is no such gap; 0 for an empty histogram.
inline double select_epsilon(const MergeHistogram& h) {
  if (h.total() == 0 || h.bin_edges.empty()) return 0.0;
  bool seen = false;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] > 0) seen = true;
    else if (seen) return h.bin_edges[i];
  }
  return h.bin_edges.back();
}

/// Single-linkage merge distances of `points`, binned.
inline MergeHistogram merge_histogram(const RowMatrix& points, int n_bins) {
  const auto mst = euclidean_mst(points);
  std::vector<double> merges;
  merges.reserve(mst.size());
  for (const auto& e : mst) merges.push_back(e.w);
  std::sort(merges.begin(), merges.end());
  return histogram_of_merges(merges, n_bins);
}

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;  // root is always the smallest member
  }
};

inline std::vector<std::vector<std::size_t>> components(DisjointSets& ds) {
  const std::size_t n = ds.parent.size();
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = ds.find(i);
    if (slot[r] == n) {
      slot[r] = out.size();
      out.emplace_back();
    }
    out[slot[r]].push_back(i);
  }
  return out;  // ordered by smallest member because i runs upward
}

}  // namespace detail

/// Connected components of the graph joining points at distance < epsilon.
/// Clusters are sorted by smallest member; members ascend.
inline std::vector<std::vector<std::size_t>> cluster(const RowMatrix& points, double epsilon) {
  require(epsilon >= 0.0, "cluster: epsilon must be non-negative");
  const auto n = static_cast<std::size_t>(points.rows());
  detail::DisjointSets ds(n);
  if (epsilon > 0.0 && n > 1) {
    const Eigen::MatrixXd dist = pairwise_distances(points);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j + 1; i < n; ++i)
        if (dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) < epsilon) ds.unite(i, j);
  }
  return detail::components(ds);
}

struct MapperVertex {
  int interval_index = 0;
  int cluster_index = 0;
  std::vector<PointId> members;  // ascending
  double mean_filter = 0.0;
};

struct MapperGraph {
  std::vector<MapperVertex> vertices;
  std::vector<std::pair<int, int>> edges;  // u < v, lexicographically sorted
  Cover cover;
  std::vector<double> epsilons;            // per interval
  std::vector<MergeHistogram> histograms;  // per interval
  int filter_id = 0;
  std::size_t n_points = 0;
  std::vector<std::vector<int>> point_vertices;  // vertices containing each point

  std::size_t size() const { return vertices.size(); }

  void rebuild_index() {
    point_vertices.assign(n_points, {});
    for (int v = 0; v < static_cast<int>(vertices.size()); ++v)
      for (PointId p : vertices[static_cast<std::size_t>(v)].members) {
        if (p >= n_points) throw InvariantError("mapper vertex member out of range");
        point_vertices[p].push_back(v);
      }
  }
};

/// Nerve edges: u -- v iff the member sets of u and v intersect.
inline std::vector<std::pair<int, int>> nerve_edges(const std::vector<std::vector<int>>& point_vertices) {
  std::set<std::pair<int, int>> e;
  for (const auto& vs : point_vertices)
    for (std::size_t a = 0; a < vs.size(); ++a)
      for (std::size_t b = a + 1; b < vs.size(); ++b)
        e.emplace(std::min(vs[a], vs[b]), std::max(vs[a], vs[b]));
  return {e.begin(), e.end()};
}

/// Clusters of one preimage from its MST: edges shorter than the selected
/// scale join points; without a histogram break the preimage is one cluster.
inline std::vector<std::vector<std::size_t>> refine_preimage(std::size_t n, const std::vector<WeightedEdge>& mst,
                                                             const MergeHistogram& h) {
  detail::DisjointSets ds(n);
  const bool split = has_break(h);
  for (const auto& e : mst)
    if (!split || e.w < h.cutoff) ds.unite(e.u, e.v);
  return detail::components(ds);
}

/// Runs the five Mapper steps for one filter. `points` and `filter_values`
/// are row-aligned; point ids in the result are row indices.
inline MapperGraph build_mapper(const RowMatrix& points, std::span<const double> filter_values,
                                const MapperParams& params, int filter_id = 0) {
  require(static_cast<std::size_t>(points.rows()) == filter_values.size(),
          "build_mapper: points and filter values are not aligned");
  require(params.n_bins >= 1, "build_mapper: n_bins must be at least 1");
  MapperGraph g;
  g.filter_id = filter_id;
  g.n_points = filter_values.size();
  g.cover = build_cover(filter_values, params.n_int, params.gain);

  for (int a = 0; a < static_cast<int>(g.cover.intervals.size()); ++a) {
    const Interval& iv = g.cover.intervals[static_cast<std::size_t>(a)];
    std::vector<PointId> idx;
    for (std::size_t i = 0; i < filter_values.size(); ++i)
      if (iv.contains(filter_values[i])) idx.push_back(i);

    if (idx.empty()) {
      g.histograms.push_back(histogram_of_merges({}, params.n_bins));
      g.epsilons.push_back(0.0);
      continue;
    }
    RowMatrix sub(static_cast<Eigen::Index>(idx.size()), points.cols());
    for (std::size_t r = 0; r < idx.size(); ++r)
      sub.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(idx[r]));

    const auto mst = euclidean_mst(sub);
    std::vector<double> merges;
    merges.reserve(mst.size());
    for (const auto& e : mst) merges.push_back(e.w);
    std::sort(merges.begin(), merges.end());
    MergeHistogram h = histogram_of_merges(merges, params.n_bins);

    int ci = 0;
    for (const auto& comp : refine_preimage(idx.size(), mst, h)) {
      MapperVertex v;
      v.interval_index = a;
      v.cluster_index = ci++;
      double sum = 0.0;
      for (std::size_t local : comp) {
        v.members.push_back(idx[local]);
        sum += filter_values[idx[local]];
      }
      v.mean_filter = sum / static_cast<double>(comp.size());
      g.vertices.push_back(std::move(v));
    }
    g.epsilons.push_back(h.cutoff);
    g.histograms.push_back(std::move(h));
  }
  g.rebuild_index();
  for (std::size_t p = 0; p < g.n_points; ++p)
    if (g.point_vertices[p].empty()) throw InvariantError("build_mapper: point " + std::to_string(p) + " in no vertex");
  g.edges = nerve_edges(g.point_vertices);
  return g;
}

}  // namespace mc
