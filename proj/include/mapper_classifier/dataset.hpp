#pragma once

// MNIST-style IDX loading, random subsets and training-set splits.

#include "mapper_classifier/common.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace mc {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Flattened images with pixels in [0,1] and their class labels.
struct Dataset {
  RowMatrix images;               // one image per row
  std::vector<int> labels;
  std::string name;
  int height = 28;
  int width = 28;
  std::vector<std::size_t> source_index;  // row index in the file the example came from

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(images.cols()); }
};

/// Assignment of every training index to one of `n` disjoint splits.
struct SplitPlan {
  std::vector<int> assignments;  // split id in [0, n) per index
  int n = 1;
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(int split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == split) out.push_back(i);
    return out;
  }
};

namespace detail {

// Reads a whole file; gzip-compressed files are inflated transparently.
inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error("cannot open " + path);
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof buf);
    if (got < 0) {
      gzclose(f);
      throw Error("read error in " + path);
    }
    if (got == 0) break;
    out.insert(out.end(), buf, buf + got);
  }
  gzclose(f);
  return out;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

inline void append_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(static_cast<unsigned char>(v >> 24));
  b.push_back(static_cast<unsigned char>(v >> 16));
  b.push_back(static_cast<unsigned char>(v >> 8));
  b.push_back(static_cast<unsigned char>(v));
}

inline void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  gzFile f = gzopen(path.c_str(), gz ? "wb9" : "wbT");
  if (f == nullptr) throw Error("cannot create " + path);
  const int wrote = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
  if (wrote != static_cast<int>(bytes.size())) throw Error("short write to " + path);
}

}  // namespace detail

/// Parses an IDX image file (magic 0x803) and label file (magic 0x801).
/// Pixels are scaled by 1/255 and otherwise left untouched.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file_bytes(images_path);
  const auto lab = detail::read_file_bytes(labels_path);

  if (img.size() < 16) throw Error(images_path + ": truncated IDX header");
  if (lab.size() < 8) throw Error(labels_path + ": truncated IDX header");
  if (detail::read_be32(img, 0) != kIdxImagesMagic)
    throw Error(images_path + ": bad magic number (expected 0x00000803)");
  if (detail::read_be32(lab, 0) != kIdxLabelsMagic)
    throw Error(labels_path + ": bad magic number (expected 0x00000801)");

  const std::size_t n = detail::read_be32(img, 4);
  const std::size_t rows = detail::read_be32(img, 8);
  const std::size_t cols = detail::read_be32(img, 12);
  const std::size_t n_labels = detail::read_be32(lab, 4);
  if (n != n_labels)
    throw Error("image count " + std::to_string(n) + " does not match label count " +
                std::to_string(n_labels));
  const std::size_t dim = rows * cols;
  if (img.size() != 16 + n * dim) throw Error(images_path + ": truncated or oversized payload");
  if (lab.size() != 8 + n) throw Error(labels_path + ": truncated or oversized payload");

  Dataset d;
  d.height = static_cast<int>(rows);
  d.width = static_cast<int>(cols);
  d.images.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.labels.resize(n);
  d.source_index.resize(n);
  const unsigned char* px = img.data() + 16;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j)
      d.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = px[i * dim + j] / 255.0;
    d.labels[i] = lab[8 + i];
    d.source_index[i] = i;
  }
  d.name = images_path;
  return d;
}

/// Writes a Dataset as IDX (gzip-compressed when the path ends in .gz).
/// Pixels are mapped back to bytes with round(255 * v).
inline void write_idx(const Dataset& d, const std::string& images_path,
                      const std::string& labels_path) {
  std::vector<unsigned char> img;
  img.reserve(16 + d.size() * d.dim());
  detail::append_be32(img, kIdxImagesMagic);
  detail::append_be32(img, static_cast<std::uint32_t>(d.size()));
  detail::append_be32(img, static_cast<std::uint32_t>(d.height));
  detail::append_be32(img, static_cast<std::uint32_t>(d.width));
  for (Eigen::Index i = 0; i < d.images.rows(); ++i)
    for (Eigen::Index j = 0; j < d.images.cols(); ++j) {
      const double v = std::clamp(d.images(i, j), 0.0, 1.0);
      img.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
  std::vector<unsigned char> lab;
  detail::append_be32(lab, kIdxLabelsMagic);
  detail::append_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (int l : d.labels) lab.push_back(static_cast<unsigned char>(l));
  detail::write_file_bytes(images_path, img);
  detail::write_file_bytes(labels_path, lab);
}

/// Rows `idx` of `d`, in the given order.
inline Dataset select(const Dataset& d, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.name = d.name;
  out.height = d.height;
  out.width = d.width;
  out.images.resize(static_cast<Eigen::Index>(idx.size()), d.images.cols());
  out.labels.resize(idx.size());
  out.source_index.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < d.size(), "select: index out of range");
    out.images.row(static_cast<Eigen::Index>(r)) = d.images.row(static_cast<Eigen::Index>(idx[r]));
    out.labels[r] = d.labels[idx[r]];
    out.source_index[r] = d.source_index.empty() ? idx[r] : d.source_index[idx[r]];
  }
  return out;
}

/// Seeded permutation of [0, n).
inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

/// Several pairwise-disjoint random subsets of the given sizes, drawn from
/// one seeded permutation.
inline std::vector<Dataset> disjoint_subsets(const Dataset& d, const std::vector<std::size_t>& sizes,
                                             std::uint64_t seed) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  require(total <= d.size(), "requested " + std::to_string(total) + " examples from a dataset of " +
                                 std::to_string(d.size()));
  const auto perm = shuffled_indices(d.size(), seed);
  std::vector<Dataset> out;
  std::size_t at = 0;
  for (std::size_t m : sizes) {
    out.push_back(select(d, std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(at),
                                                     perm.begin() + static_cast<std::ptrdiff_t>(at + m))));
    at += m;
  }
  return out;
}

inline Dataset random_subset(const Dataset& d, std::size_t m, std::uint64_t seed) {
  return std::move(disjoint_subsets(d, {m}, seed).front());
}

/// Shuffles [0, n_points) and cuts it into `n` chunks whose sizes differ by
/// at most one (the first n_points % n chunks get the extra element).
inline SplitPlan make_splits(std::size_t n_points, int n, std::uint64_t seed) {
  require(n >= 1, "number of splits must be at least 1");
  require(static_cast<std::size_t>(n) <= n_points, "more splits than points");
  SplitPlan plan;
  plan.n = n;
  plan.seed = seed;
  plan.assignments.assign(n_points, 0);
  const auto perm = shuffled_indices(n_points, seed);
  const std::size_t base = n_points / static_cast<std::size_t>(n);
  const std::size_t extra = n_points % static_cast<std::size_t>(n);
  std::size_t at = 0;
  for (int s = 0; s < n; ++s) {
    const std::size_t len = base + (static_cast<std::size_t>(s) < extra ? 1 : 0);
    for (std::size_t i = 0; i < len; ++i) plan.assignments[perm[at++]] = s;
  }
  return plan;
}

inline SplitPlan make_splits(const Dataset& d, int n, std::uint64_t seed) {
  return make_splits(d.size(), n, seed);
}

}  // namespace mc
