#include "fedgeo/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fedgeo {

namespace {

constexpr std::array<char, 6> kMagic = {'F', 'G', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kMaxLayers = 1u << 12;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void read_exact(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw std::runtime_error("checkpoint truncated");
  }
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, b, 4);
  return std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 | std::uint32_t{b[2]} << 16 |
         std::uint32_t{b[3]} << 24;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, b, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpModel& model) {
  out.write(kMagic.data(), kMagic.size());
  const auto sizes = model.layer_sizes();
  put_u32(out, static_cast<std::uint32_t>(model.layer_count()));
  for (std::size_t s : sizes) put_u32(out, static_cast<std::uint32_t>(s));
  for (const auto& layer : model.layers()) {
    for (double w : layer.weights.data()) put_f64(out, w);
    for (double b : layer.bias) put_f64(out, b);
  }
  if (!out) throw std::runtime_error("checkpoint write failed");
}

MlpModel read_checkpoint(std::istream& in) {
  std::array<char, 6> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != static_cast<std::streamsize>(magic.size()) || magic != kMagic) {
    throw std::runtime_error("checkpoint: bad magic");
  }
  const std::uint32_t n_layers = get_u32(in);
  if (n_layers < 2 || n_layers > kMaxLayers) {
    throw std::runtime_error("checkpoint: implausible layer count");
  }
  std::vector<std::size_t> sizes(n_layers + 1);
  for (auto& s : sizes) {
    s = get_u32(in);
    if (s == 0) throw std::runtime_error("checkpoint: zero layer size");
  }
  std::vector<LayerParams> layers;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerParams p{DenseMatrix(sizes[l], sizes[l + 1]), std::vector<double>(sizes[l + 1])};
    for (double& w : p.weights.data()) w = get_f64(in);
    for (double& b : p.bias) b = get_f64(in);
    layers.push_back(std::move(p));
  }
  return MlpModel(std::move(layers));
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, model);
}

MlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace fedgeo
