#pragma once

// A committee is one Mapper graph per filter column, all built on the same
// data split, together with the binary vertex-indicator embeddings of the
// split's points.

#include "mapper_classifier/common.hpp"
#include "mapper_classifier/filter_bank.hpp"
#include "mapper_classifier/mapper.hpp"
#include "mapper_classifier/parallel.hpp"

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

namespace mc {

struct Committee {
  int split_id = 0;
  std::vector<MapperGraph> graphs;  // one per filter
  FilterBank bank;
  std::vector<std::size_t> offsets;  // graphs.size()+1 prefix sums of vertex counts
  std::shared_ptr<const RowMatrix> points;  // the split's training points
  Vector point_sq_norms;

  std::size_t width() const { return offsets.empty() ? 0 : offsets.back(); }
  std::size_t n_points() const { return graphs.empty() ? 0 : graphs.front().n_points; }

  void rebuild_offsets() {
    offsets.assign(graphs.size() + 1, 0);
    for (std::size_t j = 0; j < graphs.size(); ++j) offsets[j + 1] = offsets[j] + graphs[j].size();
  }

  void attach_points(std::shared_ptr<const RowMatrix> p) {
    points = std::move(p);
    point_sq_norms = points->rowwise().squaredNorm();
  }
};

/// One Mapper graph per column of `filter_values` (rows aligned with
/// `points`). Graphs are built independently, `workers` at a time.
inline Committee build_committee(std::shared_ptr<const RowMatrix> points, const RowMatrix& filter_values,
                                 FilterBank bank, const MapperParams& params, int split_id = 0,
                                 int workers = 1) {
  require(points && points->rows() == filter_values.rows(),
          "build_committee: filter values are not aligned with the split");
  require(points->rows() > 0, "build_committee: empty split");
  Committee c;
  c.split_id = split_id;
  c.bank = std::move(bank);
  const auto n_filters = static_cast<std::size_t>(filter_values.cols());
  c.graphs.resize(n_filters);
  parallel_for(n_filters, workers, [&](std::size_t j) {
    const Vector col = filter_values.col(static_cast<Eigen::Index>(j));
    c.graphs[j] = build_mapper(*points, std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                               params, static_cast<int>(j));
  });
  c.rebuild_offsets();
  c.attach_points(std::move(points));
  return c;
}

inline Committee build_committee(const RowMatrix& points, const FilterBank& bank, const MapperParams& params,
                                 int split_id = 0, int workers = 1) {
  auto shared = std::make_shared<const RowMatrix>(points);
  RowMatrix fv = bank.kind == FilterKind::pca ? apply(bank, points) : bank.values;
  return build_committee(std::move(shared), fv, bank, params, split_id, workers);
}

/// Indicator vector of the vertices of `graph` containing training point `p`.
inline Vector g_M(PointId p, const MapperGraph& graph) {
  require(p < graph.n_points, "g_M: point id " + std::to_string(p) + " is not in the graph's split");
  const auto& vs = graph.point_vertices[p];
  if (vs.empty()) throw InvariantError("g_M: training point " + std::to_string(p) + " lies in no vertex");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(graph.size()));
  for (int v : vs) out(v) = 1.0;
  return out;
}

/// Adds weight * g_C(p) into `out` (length c.width()).
inline void accumulate_g_C(PointId p, const Committee& c, double weight, Eigen::Ref<Vector> out) {
  for (std::size_t j = 0; j < c.graphs.size(); ++j) {
    const auto& vs = c.graphs[j].point_vertices[p];
    if (vs.empty()) throw InvariantError("g_C: training point " + std::to_string(p) + " lies in no vertex");
    for (int v : vs) out(static_cast<Eigen::Index>(c.offsets[j]) + v) += weight;
  }
}

/// Concatenation of g_M over the committee's graphs.
inline Vector g_C(PointId p, const Committee& c) {
  require(p < c.n_points(), "g_C: point id " + std::to_string(p) + " is not in the committee's split");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(c.width()));
  accumulate_g_C(p, c, 1.0, out);
  return out;
}

/// Binary matrix g_C(X^i) for every point of the committee's split.
inline RowMatrix g_C_matrix(const Committee& c) {
  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(c.n_points()), static_cast<Eigen::Index>(c.width()));
  for (PointId p = 0; p < c.n_points(); ++p) {
    Vector row = Vector::Zero(m.cols());
    accumulate_g_C(p, c, 1.0, row);
    m.row(static_cast<Eigen::Index>(p)) = row.transpose();
  }
  return m;
}

/// Column offset of each committee's block in the full embedding
/// (split-major, then filter, then vertex).
inline std::vector<std::size_t> block_offsets(const std::vector<Committee>& committees) {
  std::vector<std::size_t> off(committees.size() + 1, 0);
  for (std::size_t i = 0; i < committees.size(); ++i) off[i + 1] = off[i] + committees[i].width();
  return off;
}

/// Maps the rows of `points` through committee `c` for an off-diagonal block.
using OffDiagonalEmbedder = std::function<RowMatrix(const Committee& c, const RowMatrix& points)>;

/// Training matrix: diagonal blocks g_{C_i}(X^i), off-diagonal blocks
/// g'_{C_i}(X^j). Rows follow the split order: all of split 0, then split 1...
/// `split_points[i]` must be the points the i-th committee was built on.
inline RowMatrix assemble_block_matrix(const std::vector<std::shared_ptr<const RowMatrix>>& split_points,
                                       const std::vector<Committee>& committees,
                                       const OffDiagonalEmbedder& gprime) {
  require(split_points.size() == committees.size(), "assemble_block_matrix: one committee per split required");
  const auto cols = block_offsets(committees);
  std::vector<std::size_t> rows(split_points.size() + 1, 0);
  for (std::size_t i = 0; i < split_points.size(); ++i)
    rows[i + 1] = rows[i] + static_cast<std::size_t>(split_points[i]->rows());

  RowMatrix m = RowMatrix::Zero(static_cast<Eigen::Index>(rows.back()), static_cast<Eigen::Index>(cols.back()));
  for (std::size_t j = 0; j < split_points.size(); ++j) {      // row block
    for (std::size_t i = 0; i < committees.size(); ++i) {      // column block
      const auto r0 = static_cast<Eigen::Index>(rows[j]);
      const auto c0 = static_cast<Eigen::Index>(cols[i]);
      const auto nr = static_cast<Eigen::Index>(rows[j + 1] - rows[j]);
      const auto nc = static_cast<Eigen::Index>(committees[i].width());
      if (i == j) {
        m.block(r0, c0, nr, nc) = g_C_matrix(committees[i]);
      } else {
        RowMatrix block = gprime(committees[i], *split_points[j]);
        require(block.rows() == nr && block.cols() == nc, "assemble_block_matrix: off-diagonal block has wrong shape");
        m.block(r0, c0, nr, nc) = block;
      }
    }
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    if (m.row(r).cwiseAbs().maxCoeff() == 0.0)
      throw Error("assemble_block_matrix: row " + std::to_string(r) + " is all zeros (embedding failed)");
  return m;
}

struct DimensionReport {
  std::vector<std::vector<std::size_t>> per_filter;  // [split][filter] vertex counts
  std::vector<std::size_t> per_split;
  std::size_t total = 0;
};

inline DimensionReport committee_dimensions(const std::vector<Committee>& committees) {
  DimensionReport r;
  for (const auto& c : committees) {
    std::vector<std::size_t> counts;
    for (const auto& g : c.graphs) counts.push_back(g.size());
    const std::size_t sum = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    r.per_filter.push_back(std::move(counts));
    r.per_split.push_back(sum);
    r.total += sum;
  }
  return r;
}

}  // namespace mc
