#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedgeo {

inline constexpr double kDefaultEpsilon = 1e-8;
inline constexpr double kDefaultFlagThreshold = 3.5;

struct RoundScores {
  std::size_t round = 0;
  std::vector<double> divergences;
  double median = 0.0;
  double mad = 0.0;
  std::vector<double> zscores;  // (D_c - median) / (mad + epsilon)
  double epsilon = kDefaultEpsilon;
};

// Even counts average the two central order statistics.
double median_of(std::span<const double> values);

// Median of |x - median(x)|.
double median_absolute_deviation(std::span<const double> values, double median);

// Needs at least two clients and epsilon > 0 (std::invalid_argument otherwise).
RoundScores robust_scores(std::span<const double> divergences, double epsilon = kDefaultEpsilon,
                          std::size_t round = 0);

// Clients with z > threshold, highest z first. threshold must be > 0.
std::vector<std::size_t> flag_outliers(const RoundScores& scores, double threshold);

}  // namespace fedgeo
