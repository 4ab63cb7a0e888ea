#include "fedgeo/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace fedgeo {

namespace {

double pixel_or_zero(std::span<const double> image, std::size_t side, long x, long y) {
  const long s = static_cast<long>(side);
  if (x < 0 || y < 0 || x >= s || y >= s) return 0.0;
  return image[static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x)];
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

std::string_view to_string(PerturbationKind kind) {
  switch (kind) {
    case PerturbationKind::gaussian_noise: return "gaussian_noise";
    case PerturbationKind::rotation: return "rotation";
    case PerturbationKind::blur: return "blur";
  }
  return "unknown";
}

PerturbationKind parse_perturbation_kind(std::string_view name) {
  if (name == "gaussian_noise") return PerturbationKind::gaussian_noise;
  if (name == "rotation") return PerturbationKind::rotation;
  if (name == "blur") return PerturbationKind::blur;
  throw std::invalid_argument("unknown perturbation kind '" + std::string(name) + "'");
}

void add_gaussian_noise(std::span<double> image, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : image) v = std::clamp(v + noise(rng), 0.0, 1.0);
}

std::vector<double> rotate_bilinear(std::span<const double> image, std::size_t side,
                                    double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double centre = (static_cast<double>(side) - 1.0) / 2.0;
  std::vector<double> out(side * side, 0.0);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      // Inverse-map the output pixel into the source image.
      const double dx = static_cast<double>(x) - centre;
      const double dy = static_cast<double>(y) - centre;
      const double sx = c * dx + s * dy + centre;
      const double sy = -s * dx + c * dy + centre;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double tx = sx - fx;
      const double ty = sy - fy;
      const auto x0 = static_cast<long>(fx);
      const auto y0 = static_cast<long>(fy);
      const double v = (1 - tx) * (1 - ty) * pixel_or_zero(image, side, x0, y0) +
                       tx * (1 - ty) * pixel_or_zero(image, side, x0 + 1, y0) +
                       (1 - tx) * ty * pixel_or_zero(image, side, x0, y0 + 1) +
                       tx * ty * pixel_or_zero(image, side, x0 + 1, y0 + 1);
      out[y * side + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<double> gaussian_blur(std::span<const double> image, std::size_t side, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  const long radius = static_cast<long>(kernel.size() / 2);
  const long last = static_cast<long>(side) - 1;
  std::vector<double> tmp(side * side, 0.0);
  std::vector<double> out(side * side, 0.0);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        const long xx = std::clamp(static_cast<long>(x) + i, 0L, last);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               image[y * side + static_cast<std::size_t>(xx)];
      }
      tmp[y * side + x] = acc;
    }
  }
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        const long yy = std::clamp(static_cast<long>(y) + i, 0L, last);
        acc += kernel[static_cast<std::size_t>(i + radius)] *
               tmp[static_cast<std::size_t>(yy) * side + x];
      }
      out[y * side + x] = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

DenseMatrix apply_perturbations(const DenseMatrix& images, std::span<const PerturbationSpec> specs,
                                std::size_t side) {
  if (side == 0 || images.cols() != side * side) {
    throw std::invalid_argument("apply_perturbations: row length " +
                                std::to_string(images.cols()) + " is not " +
                                std::to_string(side) + "^2");
  }
  for (const auto& spec : specs) {
    if (!(spec.magnitude > 0.0)) {
      throw std::invalid_argument("perturbation magnitude must be > 0 (" +
                                  std::string(to_string(spec.kind)) + ")");
    }
  }
  DenseMatrix out = images;
  for (const auto& spec : specs) {
    // One noise stream per spec, advanced row by row.
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.magnitude);
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row(r);
      switch (spec.kind) {
        case PerturbationKind::gaussian_noise:
          for (double& v : row) v = std::clamp(v + noise(rng), 0.0, 1.0);
          break;
        case PerturbationKind::rotation: {
          auto rotated = rotate_bilinear(row, side, spec.magnitude);
          std::copy(rotated.begin(), rotated.end(), row.begin());
          break;
        }
        case PerturbationKind::blur: {
          auto blurred = gaussian_blur(row, side, spec.magnitude);
          std::copy(blurred.begin(), blurred.end(), row.begin());
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace fedgeo
