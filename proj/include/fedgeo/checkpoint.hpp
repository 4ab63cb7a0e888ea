#pragma once

#include <filesystem>
#include <iosfwd>

#include "fedgeo/nn.hpp"

namespace fedgeo {

// Flat little-endian model checkpoint:
//   "FGMLP1" | u32 weight-layer count L | (L+1) x u32 layer sizes |
//   per layer: fan_in*fan_out f64 weights (row-major), fan_out f64 biases.
void write_checkpoint(std::ostream& out, const MlpModel& model);
MlpModel read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fedgeo
