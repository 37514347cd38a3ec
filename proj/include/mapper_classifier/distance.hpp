#pragma once

// Euclidean distance kernels shared by the clustering and k-NN code.

#include "mapper_classifier/common.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mc {

inline double euclidean(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return (a - b).norm();
}

/// Full symmetric distance matrix of the rows of `points`.
/// Small problems are summed directly; larger ones use the Gram identity
/// |a-b|^2 = |a|^2 + |b|^2 - 2 a.b, clamped at zero.
inline Eigen::MatrixXd pairwise_distances(const RowMatrix& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd dist(n, n);
  if (n * n * points.cols() <= 4'000'000) {
    for (Eigen::Index j = 0; j < n; ++j) {
      dist(j, j) = 0.0;
      for (Eigen::Index i = j + 1; i < n; ++i) {
        const double d = (points.row(i) - points.row(j)).norm();
        dist(i, j) = d;
        dist(j, i) = d;
      }
    }
    return dist;
  }
  const Vector sq = points.rowwise().squaredNorm();
  dist.setZero();
  dist.selfadjointView<Eigen::Lower>().rankUpdate(points, -2.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    dist(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double d = std::sqrt(std::max(0.0, dist(i, j) + sq(i) + sq(j)));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }
  return dist;
}

/// Distances between every row of `queries` (rows) and every row of
/// `points` (columns), via the Gram identity.
inline RowMatrix cross_distances(const RowMatrix& queries, const RowMatrix& points, const Vector& point_sq_norms) {
  RowMatrix d2 = -2.0 * (queries * points.transpose());
  const Vector qsq = queries.rowwise().squaredNorm();
  d2.colwise() += qsq;
  d2.rowwise() += point_sq_norms.transpose();
  return d2.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace mc
