#pragma once

// Extension of the committee embedding to points outside the training split:
// filter values pick (broadened) cover intervals, the union of their
// vertices restricts a k-nearest-neighbour search, and the neighbours'
// binary embeddings are averaged with inverse-distance weights.

#include "mapper_classifier/committee.hpp"
#include "mapper_classifier/distance.hpp"
#include "mapper_classifier/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mc {

struct GPrimeParams {
  int k = 6;
  double delta = 0.2;
  double eta = 1e-5;

  void validate() const {
    require(k >= 1, "g': k must be at least 1");
    require(delta >= 0.0 && delta < 1.0, "g': delta must lie in [0, 1)");
    require(eta > 0.0, "g': eta must be positive");
  }
};

/// Intervals alpha with |f - mid(U_alpha)| < half_width(U_alpha) * (1 + delta).
/// Values below the cover map to the first interval, above it to the last.
inline std::vector<int> candidate_intervals(double fval, const Cover& cover, double delta) {
  const int n = static_cast<int>(cover.intervals.size());
  if (n == 0) return {};
  if (cover.degenerate) return {0};
  if (fval < cover.min) return {0};
  if (fval > cover.max) return {n - 1};
  std::vector<int> out;
  for (int a = 0; a < n; ++a) {
    const Interval& iv = cover.intervals[static_cast<std::size_t>(a)];
    if (std::abs(fval - iv.mid()) < iv.half_width() * (1.0 + delta)) out.push_back(a);
  }
  return out;
}

/// Union of the member sets of all vertices lying over the given intervals.
inline std::vector<PointId> candidate_points(const std::vector<int>& alphas, const MapperGraph& graph) {
  std::vector<char> hit(graph.n_points, 0);
  for (const auto& v : graph.vertices)
    if (std::find(alphas.begin(), alphas.end(), v.interval_index) != alphas.end())
      for (PointId p : v.members) hit[p] = 1;
  std::vector<PointId> out;
  for (PointId p = 0; p < graph.n_points; ++p)
    if (hit[p]) out.push_back(p);
  return out;
}

struct CandidateSet {
  std::vector<char> mask;  // per training point of the split
  bool fallback = false;   // no vertex matched: the whole split is searched
};

/// Candidate pool for a query: union over every filter of the committee.
inline CandidateSet committee_candidates(const Eigen::Ref<const Eigen::RowVectorXd>& fvals, const Committee& c,
                                         double delta) {
  require(static_cast<std::size_t>(fvals.size()) == c.graphs.size(),
          "g': query has " + std::to_string(fvals.size()) + " filter values, committee has " +
              std::to_string(c.graphs.size()) + " graphs");
  CandidateSet cs;
  cs.mask.assign(c.n_points(), 0);
  bool any = false;
  for (std::size_t j = 0; j < c.graphs.size(); ++j) {
    const auto alphas = candidate_intervals(fvals(static_cast<Eigen::Index>(j)), c.graphs[j].cover, delta);
    for (const auto& v : c.graphs[j].vertices)
      if (std::find(alphas.begin(), alphas.end(), v.interval_index) != alphas.end())
        for (PointId p : v.members) {
          cs.mask[p] = 1;
          any = true;
        }
  }
  if (!any) {
    cs.fallback = true;
    std::fill(cs.mask.begin(), cs.mask.end(), 1);
  }
  return cs;
}

struct Neighbor {
  PointId id = 0;
  double distance = 0.0;
};

struct GPrimeResult {
  Vector embedding;
  std::vector<Neighbor> neighbors;  // ascending distance, ties by id
  std::vector<double> weights;
  bool fallback = false;
};

namespace detail {

// k nearest masked points by approximate distances, then exact distances
// for the winners; ordered by (distance, id).
inline std::vector<Neighbor> nearest_candidates(const Eigen::Ref<const Eigen::RowVectorXd>& x, const double* approx,
                                                const CandidateSet& cs, const RowMatrix& points, int k,
                                                PointId exclude) {
  std::vector<Neighbor> pool;
  for (PointId p = 0; p < cs.mask.size(); ++p)
    if (cs.mask[p] && p != exclude) pool.push_back({p, approx[p]});
  const auto by_dist = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  const std::size_t take = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(k));
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), by_dist);
  pool.resize(take);
  for (auto& nb : pool) nb.distance = euclidean(points.row(static_cast<Eigen::Index>(nb.id)), x);
  std::sort(pool.begin(), pool.end(), by_dist);
  return pool;
}

inline GPrimeResult weigh(const std::vector<Neighbor>& nbs, const Committee& c, double eta, bool fallback) {
  GPrimeResult r;
  r.neighbors = nbs;
  r.fallback = fallback;
  r.embedding = Vector::Zero(static_cast<Eigen::Index>(c.width()));
  double total = 0.0;
  for (const auto& nb : nbs) {
    r.weights.push_back(1.0 / (nb.distance + eta));
    total += r.weights.back();
  }
  for (std::size_t l = 0; l < nbs.size(); ++l) {
    r.weights[l] /= total;
    accumulate_g_C(nbs[l].id, c, r.weights[l], r.embedding);
  }
  return r;
}

inline constexpr PointId kNoPoint = std::numeric_limits<PointId>::max();

}  // namespace detail

/// g'_C for every row of `queries`, whose filter values under the
/// committee's bank are the matching rows of `fvals`.
inline std::vector<GPrimeResult> g_prime_batch(const RowMatrix& queries, const RowMatrix& fvals, const Committee& c,
                                               const GPrimeParams& p, int workers = 1) {
  p.validate();
  require(c.points != nullptr, "g': committee has no training points attached");
  require(c.width() > 0, "g': committee has zero vertices");
  require(queries.cols() == c.points->cols(), "g': query dimension does not match the committee");
  require(queries.rows() == fvals.rows(), "g': queries and filter values are not aligned");
  std::vector<GPrimeResult> out(static_cast<std::size_t>(queries.rows()));
  constexpr Eigen::Index block = 256;
  const Eigen::Index n_blocks = (queries.rows() + block - 1) / block;
  parallel_for(static_cast<std::size_t>(n_blocks), workers, [&](std::size_t b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index nr = std::min(block, queries.rows() - r0);
    const RowMatrix q = queries.middleRows(r0, nr);
    const RowMatrix dist = cross_distances(q, *c.points, c.point_sq_norms);
    for (Eigen::Index r = 0; r < nr; ++r) {
      const CandidateSet cs = committee_candidates(fvals.row(r0 + r), c, p.delta);
      const auto nbs = detail::nearest_candidates(q.row(r), dist.row(r).data(), cs, *c.points, p.k, detail::kNoPoint);
      out[static_cast<std::size_t>(r0 + r)] = detail::weigh(nbs, c, p.eta, cs.fallback);
    }
  });
  return out;
}

/// Filter values of `queries` under the committee's own bank.
inline RowMatrix committee_filter_values(const Committee& c, const RowMatrix& queries) {
  if (c.bank.kind != FilterKind::pca)
    throw Error("g': external filter banks cannot project new points; supply their latent values");
  return apply(c.bank, queries);
}

inline GPrimeResult g_prime(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Committee& c, const GPrimeParams& p) {
  const RowMatrix q = x;
  return std::move(g_prime_batch(q, committee_filter_values(c, q), c, p).front());
}

/// Embedding matrix g'_C(queries), one row per query.
inline RowMatrix g_prime_matrix(const Committee& c, const RowMatrix& queries, const RowMatrix& fvals,
                                const GPrimeParams& p, int workers = 1) {
  const auto res = g_prime_batch(queries, fvals, c, p, workers);
  RowMatrix m(queries.rows(), static_cast<Eigen::Index>(c.width()));
  for (std::size_t r = 0; r < res.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = res[r].embedding.transpose();
  return m;
}

/// Sum of inverse distances from x to its k nearest candidates
/// (optionally skipping training point `exclude`).
inline double h_k(const Eigen::Ref<const Eigen::RowVectorXd>& x, const Committee& c, int k,
                  double delta = GPrimeParams{}.delta, PointId exclude = detail::kNoPoint) {
  require(k >= 1, "h_k: k must be at least 1");
  const RowMatrix q = x;
  const RowMatrix fv = committee_filter_values(c, q);
  const CandidateSet cs = committee_candidates(fv.row(0), c, delta);
  const RowMatrix dist = cross_distances(q, *c.points, c.point_sq_norms);
  const auto nbs = detail::nearest_candidates(x, dist.row(0).data(), cs, *c.points, k, exclude);
  double h = 0.0;
  for (const auto& nb : nbs) h += 1.0 / nb.distance;
  return h;
}

}  // namespace mc
