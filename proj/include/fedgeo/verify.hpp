#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedgeo/geometry.hpp"

namespace fedgeo {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Built-in oracle suite: hand-computed formula cases, packed-vs-naive affinity,
// gradient check, permutation invariance, self-divergence, median/MAD against a
// sort-based reference. `hamming` replaces the affinity kernel everywhere so a
// corrupted kernel can be shown to trip the suite.
std::vector<CheckResult> run_verification(HammingFn hamming = packed_hamming);

// Prints one PASS/FAIL line per check; returns true iff all passed.
bool report_verification(std::ostream& out, const std::vector<CheckResult>& results);

// Permutes hidden neurons of layer `layer` (0-based hidden layer index):
// output columns and biases of that layer and input rows of the next layer.
MlpModel permute_hidden_layer(const MlpModel& model, std::size_t layer,
                              const std::vector<std::size_t>& permutation);

}  // namespace fedgeo
