#pragma once

// Filter functions for the committee: PCA projections fitted on one split,
// or latent coordinates computed elsewhere and loaded from a text file.

#include "mapper_classifier/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mc {

enum class FilterKind { pca, external };

inline const char* to_string(FilterKind k) { return k == FilterKind::pca ? "pca" : "external"; }

struct FilterBank {
  FilterKind kind = FilterKind::pca;
  RowMatrix components;         // pca: n_components x dim, orthonormal rows
  Eigen::RowVectorXd mean;      // pca: dim
  Vector variances;             // pca: eigenvalues of the covariance, decreasing
  RowMatrix values;             // external: points x n_components
  int split_id = 0;

  std::size_t n_components() const {
    return static_cast<std::size_t>(kind == FilterKind::pca ? components.rows() : values.cols());
  }
  std::size_t dim() const { return static_cast<std::size_t>(components.cols()); }
};

/// Top principal directions of the mean-centred data, from the
/// eigendecomposition of its covariance matrix. Each component is signed so
/// that its largest-magnitude coordinate is positive.
inline FilterBank fit_pca(const RowMatrix& data, std::size_t n_components, int split_id = 0) {
  const auto n = static_cast<std::size_t>(data.rows());
  require(n_components >= 1, "fit_pca: need at least one component");
  require(n >= n_components, "fit_pca: split has " + std::to_string(n) + " points, fewer than " +
                                 std::to_string(n_components) + " components");
  require(static_cast<std::size_t>(data.cols()) >= n_components,
          "fit_pca: more components than input dimensions");

  FilterBank bank;
  bank.kind = FilterKind::pca;
  bank.split_id = split_id;
  bank.mean = data.colwise().mean();
  const RowMatrix centred = data.rowwise() - bank.mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(data.cols(), data.cols());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centred.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n > 1 ? n - 1 : 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("fit_pca: eigendecomposition failed");
  const Vector& evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  const Eigen::Index d = evals.size();

  const double top = std::max(evals(d - 1), 0.0);
  const double floor = std::max(top * 1e-12, 1e-300);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    if (evals(i) > floor) ++rank;
  if (rank < n_components)
    throw Error("fit_pca: data has rank " + std::to_string(rank) + ", fewer than the " +
                std::to_string(n_components) + " requested components");

  const auto k = static_cast<Eigen::Index>(n_components);
  bank.components.resize(k, d);
  bank.variances.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    Vector v = evecs.col(d - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
      if (std::abs(v(i)) > std::abs(v(arg))) arg = i;
    if (v(arg) < 0) v = -v;
    bank.components.row(c) = v.transpose();
    bank.variances(c) = evals(d - 1 - c);
  }
  return bank;
}

/// Filter values of `points` (one row per point, one column per component).
inline RowMatrix apply(const FilterBank& bank, const RowMatrix& points) {
  if (bank.kind == FilterKind::external)
    throw Error("apply: external filter banks are indexed by point id, not by coordinates");
  require(static_cast<std::size_t>(points.cols()) == bank.dim(),
          "apply: point dimension " + std::to_string(points.cols()) + " does not match filter bank dimension " +
              std::to_string(bank.dim()));
  return (points.rowwise() - bank.mean) * bank.components.transpose();
}

/// Filter values of the external bank's points `ids`.
inline RowMatrix apply_ids(const FilterBank& bank, const std::vector<PointId>& ids) {
  if (bank.kind != FilterKind::external) throw Error("apply_ids: only external banks support id lookup");
  RowMatrix out(static_cast<Eigen::Index>(ids.size()), bank.values.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= static_cast<std::size_t>(bank.values.rows()))
      throw Error("apply_ids: unknown point id " + std::to_string(ids[r]));
    out.row(static_cast<Eigen::Index>(r)) = bank.values.row(static_cast<Eigen::Index>(ids[r]));
  }
  return out;
}

/// Parses a latent-matrix file: a header line `n_points n_components`
/// followed by one whitespace-separated row of reals per point.
/// `expected_points`, when non-zero, must match the header.
inline FilterBank load_external(const std::string& path, std::size_t expected_points = 0,
                                int split_id = 0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open latent file " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  long long n = -1, c = -1;
  if (!(hs >> n >> c) || n < 0 || c <= 0) throw Error(path + ": bad header, expected `n_points n_components`");
  if (expected_points != 0 && static_cast<std::size_t>(n) != expected_points)
    throw Error(path + ": declares " + std::to_string(n) + " points but the split has " +
                std::to_string(expected_points));

  FilterBank bank;
  bank.kind = FilterKind::external;
  bank.split_id = split_id;
  bank.values.resize(n, c);
  std::string line;
  long long row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row >= n) throw Error(path + ": more rows than the declared " + std::to_string(n));
    std::istringstream ls(line);
    long long col = 0;
    double v = 0;
    while (ls >> v) {
      if (col >= c) throw Error(path + ": row " + std::to_string(row + 1) + " has more than " + std::to_string(c) + " columns");
      if (!std::isfinite(v)) throw Error(path + ": non-finite value in row " + std::to_string(row + 1));
      bank.values(row, col++) = v;
    }
    if (!ls.eof()) throw Error(path + ": unparsable value in row " + std::to_string(row + 1));
    if (col != c)
      throw Error(path + ": row " + std::to_string(row + 1) + " has " + std::to_string(col) + " columns, expected " +
                  std::to_string(c));
    ++row;
  }
  if (row != n) throw Error(path + ": " + std::to_string(row) + " rows, header declares " + std::to_string(n));
  return bank;
}

}  // namespace mc
