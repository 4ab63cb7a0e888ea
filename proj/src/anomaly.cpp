#include "fedgeo/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedgeo {

double median_of(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::vector<double> v(values.begin(), values.end());
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double median_absolute_deviation(std::span<const double> values, double median) {
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double x : values) dev.push_back(std::abs(x - median));
  return median_of(dev);
}

RoundScores robust_scores(std::span<const double> divergences, double epsilon, std::size_t round) {
  if (divergences.size() < 2) throw std::invalid_argument("robust_scores: need at least 2 clients");
  if (!(epsilon > 0.0)) throw std::invalid_argument("robust_scores: epsilon must be > 0");
  RoundScores s;
  s.round = round;
  s.epsilon = epsilon;
  s.divergences.assign(divergences.begin(), divergences.end());
  s.median = median_of(divergences);
  s.mad = median_absolute_deviation(divergences, s.median);
  s.zscores.reserve(divergences.size());
  for (double d : divergences) s.zscores.push_back((d - s.median) / (s.mad + epsilon));
  return s;
}

std::vector<std::size_t> flag_outliers(const RoundScores& scores, double threshold) {
  if (!(threshold > 0.0)) throw std::invalid_argument("flag_outliers: threshold must be > 0");
  std::vector<std::size_t> flagged;
  for (std::size_t c = 0; c < scores.zscores.size(); ++c) {
    if (scores.zscores[c] > threshold) flagged.push_back(c);
  }
  std::stable_sort(flagged.begin(), flagged.end(), [&](std::size_t a, std::size_t b) {
    return scores.zscores[a] > scores.zscores[b];
  });
  return flagged;
}

}  // namespace fedgeo
