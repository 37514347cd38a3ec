#pragma once

// Black-box perturbation models driven by a single strength parameter lambda.

#include "mapper_classifier/common.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace mc {

enum class NoiseModel { blur, gaussian, salt_pepper };

inline const char* to_string(NoiseModel m) {
  switch (m) {
    case NoiseModel::blur: return "blur";
    case NoiseModel::gaussian: return "gaussian";
    case NoiseModel::salt_pepper: return "salt_pepper";
  }
  return "?";
}

inline NoiseModel parse_noise_model(const std::string& s) {
  if (s == "blur") return NoiseModel::blur;
  if (s == "gaussian" || s == "gauss") return NoiseModel::gaussian;
  if (s == "salt_pepper" || s == "s&p" || s == "sp") return NoiseModel::salt_pepper;
  throw Error("unknown noise model '" + s + "' (expected blur, gaussian or salt_pepper)");
}

struct NoiseSpec {
  NoiseModel model = NoiseModel::blur;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct PerturbedImage {
  Vector pixels;
  double l2 = 0.0;  // distance to the original image
  NoiseSpec spec;
  std::size_t flipped = 0;  // salt & pepper: pixels selected for replacement
};

namespace detail {

inline PerturbedImage finish(const Eigen::Ref<const Vector>& original, Vector pixels, NoiseSpec spec) {
  PerturbedImage out;
  out.l2 = (pixels - original).norm();
  out.pixels = std::move(pixels);
  out.spec = spec;
  return out;
}

inline void check_lambda(double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0, "noise: lambda must be finite and non-negative");
}

}  // namespace detail

/// Normalised 1-D Gaussian kernel with standard deviation sigma, truncated
/// at radius ceil(3 sigma). sigma = 0 gives the identity kernel {1}.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Isotropic Gaussian blur with sigma = 28 * lambda (separable, edges
/// replicated), clipped to the original image's [min, max].
inline PerturbedImage gaussian_blur(const Eigen::Ref<const Vector>& img, double lambda, int height = 28,
                                    int width = 28) {
  detail::check_lambda(lambda);
  require(img.size() == static_cast<Eigen::Index>(height) * width, "gaussian_blur: image is not height x width");
  const NoiseSpec spec{NoiseModel::blur, lambda, 0};
  if (lambda == 0.0) return detail::finish(img, img, spec);

  const auto k = gaussian_kernel(28.0 * lambda);
  const int r = static_cast<int>(k.size() / 2);
  const auto at = [&](const Vector& v, int y, int x) {
    y = std::clamp(y, 0, height - 1);
    x = std::clamp(x, 0, width - 1);
    return v(static_cast<Eigen::Index>(y) * width + x);
  };
  Vector rows(img.size()), out(img.size());
  const Vector src = img;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += k[static_cast<std::size_t>(t + r)] * at(src, y, x + t);
      rows(static_cast<Eigen::Index>(y) * width + x) = s;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int t = -r; t <= r; ++t) s += k[static_cast<std::size_t>(t + r)] * at(rows, y + t, x);
      out(static_cast<Eigen::Index>(y) * width + x) = s;
    }
  out = out.cwiseMax(img.minCoeff()).cwiseMin(img.maxCoeff());
  return detail::finish(img, std::move(out), spec);
}

/// Adds i.i.d. N(0, (0.1 sqrt(lambda))^2) to every pixel, then clips to [0,1].
inline PerturbedImage gaussian_noise(const Eigen::Ref<const Vector>& img, double lambda, std::mt19937_64& rng) {
  detail::check_lambda(lambda);
  const NoiseSpec spec{NoiseModel::gaussian, lambda, 0};
  if (lambda == 0.0) return detail::finish(img, img, spec);
  std::normal_distribution<double> noise(0.0, 0.1 * std::sqrt(lambda));
  Vector out(img.size());
  for (Eigen::Index i = 0; i < img.size(); ++i) out(i) = std::clamp(img(i) + noise(rng), 0.0, 1.0);
  return detail::finish(img, std::move(out), spec);
}

/// Flips each pixel with probability lambda; a flipped pixel becomes the
/// image maximum (salt) or minimum (pepper) with equal odds.
inline PerturbedImage salt_pepper(const Eigen::Ref<const Vector>& img, double lambda, std::mt19937_64& rng) {
  detail::check_lambda(lambda);
  require(lambda <= 1.0, "salt_pepper: lambda is a probability and must not exceed 1");
  const NoiseSpec spec{NoiseModel::salt_pepper, lambda, 0};
  const double lo = img.minCoeff(), hi = img.maxCoeff();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector out = img;
  if (lambda == 0.0) return detail::finish(img, std::move(out), spec);
  std::size_t flipped = 0;
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    if (u(rng) < lambda) {
      out(i) = u(rng) < 0.5 ? hi : lo;
      ++flipped;
    }
  }
  PerturbedImage p = detail::finish(img, std::move(out), spec);
  p.flipped = flipped;
  return p;
}

/// Applies `spec` with a random stream seeded from spec.seed.
inline PerturbedImage perturb(const Eigen::Ref<const Vector>& img, const NoiseSpec& spec, int height = 28,
                              int width = 28) {
  std::mt19937_64 rng(spec.seed);
  PerturbedImage p;
  switch (spec.model) {
    case NoiseModel::blur: p = gaussian_blur(img, spec.lambda, height, width); break;
    case NoiseModel::gaussian: p = gaussian_noise(img, spec.lambda, rng); break;
    case NoiseModel::salt_pepper: p = salt_pepper(img, spec.lambda, rng); break;
  }
  p.spec = spec;
  return p;
}

}  // namespace mc
