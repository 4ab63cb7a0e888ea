#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedgeo/dense_matrix.hpp"

namespace fedgeo {

enum class PerturbationKind { gaussian_noise, rotation, blur };

// magnitude: noise sigma, rotation angle in degrees, or blur kernel sigma.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::gaussian_noise;
  double magnitude = 0.0;
  std::uint64_t seed = 0;
};

std::string_view to_string(PerturbationKind kind);
PerturbationKind parse_perturbation_kind(std::string_view name);

// Applies the specs in order to every row, each row viewed as a side x side
// image. Outputs are clamped to [0,1]. Throws std::invalid_argument when rows
// are not side*side long or a magnitude is not positive.
DenseMatrix apply_perturbations(const DenseMatrix& images, std::span<const PerturbationSpec> specs,
                                std::size_t side);

// Single-image building blocks, exposed for testing.
void add_gaussian_noise(std::span<double> image, double sigma, std::uint64_t seed);
std::vector<double> rotate_bilinear(std::span<const double> image, std::size_t side,
                                    double degrees);
std::vector<double> gaussian_blur(std::span<const double> image, std::size_t side, double sigma);

}  // namespace fedgeo
