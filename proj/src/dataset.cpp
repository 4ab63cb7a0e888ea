#include "fedgeo/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>

namespace fedgeo {

namespace {

std::uint32_t be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return std::uint32_t{bytes[offset]} << 24 | std::uint32_t{bytes[offset + 1]} << 16 |
         std::uint32_t{bytes[offset + 2]} << 8 | std::uint32_t{bytes[offset + 3]};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxErrorKind::open_failed, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.images = gather_rows(images, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.n_classes = n_classes;
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes) {
  if (image_bytes.size() < 16) throw IdxError(IdxErrorKind::truncated, "image file header truncated");
  if (label_bytes.size() < 8) throw IdxError(IdxErrorKind::truncated, "label file header truncated");
  const std::uint32_t image_magic = be32(image_bytes, 0);
  if (image_magic != kIdxImageMagic) {
    throw IdxError(IdxErrorKind::wrong_magic,
                   "wrong magic in image file: " + std::to_string(image_magic));
  }
  const std::uint32_t label_magic = be32(label_bytes, 0);
  if (label_magic != kIdxLabelMagic) {
    throw IdxError(IdxErrorKind::wrong_magic,
                   "wrong magic in label file: " + std::to_string(label_magic));
  }
  const std::size_t n = be32(image_bytes, 4);
  const std::size_t rows = be32(image_bytes, 8);
  const std::size_t cols = be32(image_bytes, 12);
  const std::size_t n_labels = be32(label_bytes, 4);
  if (n != n_labels) {
    throw IdxError(IdxErrorKind::count_mismatch, "image count " + std::to_string(n) +
                                                     " != label count " + std::to_string(n_labels));
  }
  const std::size_t d = rows * cols;
  if (image_bytes.size() - 16 < n * d) {
    throw IdxError(IdxErrorKind::truncated, "image file truncated");
  }
  if (label_bytes.size() - 8 < n) throw IdxError(IdxErrorKind::truncated, "label file truncated");

  Dataset ds;
  ds.images = DenseMatrix(n, d);
  auto& px = ds.images.data();
  for (std::size_t k = 0; k < n * d; ++k) px[k] = image_bytes[16 + k] / 255.0;
  ds.labels.resize(n);
  int max_label = -1;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = label_bytes[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.n_classes = static_cast<std::size_t>(max_label + 1);
  return ds;
}

Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

Dataset synth_dataset(std::size_t n, std::size_t d, std::size_t n_classes, std::uint64_t seed) {
  if (n_classes == 0 || d == 0) throw std::invalid_argument("synth_dataset: zero classes or dim");
  if (n < n_classes) throw std::invalid_argument("synth_dataset: n < n_classes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mean_dist(0.2, 0.8);
  std::normal_distribution<double> noise(0.0, 1.0);

  DenseMatrix means(n_classes, d);
  for (double& m : means.data()) m = mean_dist(rng);

  Dataset ds;
  ds.n_classes = n_classes;
  ds.images = DenseMatrix(n, d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % n_classes;
    ds.labels[i] = static_cast<int>(k);
    auto row = ds.images.row(i);
    auto mu = means.row(k);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = std::clamp(mu[j] + 0.1 * noise(rng), 0.0, 1.0);
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_first) {
  if (n_first > ds.size()) throw std::invalid_argument("split_dataset: split point past end");
  std::vector<std::size_t> first(n_first);
  std::iota(first.begin(), first.end(), 0);
  std::vector<std::size_t> second(ds.size() - n_first);
  std::iota(second.begin(), second.end(), n_first);
  return {ds.subset(first), ds.subset(second)};
}

std::vector<std::size_t> select_probe_indices(std::span<const int> labels, std::size_t n_classes,
                                              std::size_t m, std::uint64_t seed) {
  if (m > labels.size()) {
    throw std::invalid_argument("probe size " + std::to_string(m) + " exceeds dataset size " +
                                std::to_string(labels.size()));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }
  for (auto& members : by_class) std::shuffle(members.begin(), members.end(), rng);

  // Round-robin over classes in a random order, one sample at a time, skipping
  // exhausted classes. Quotas then differ by at most one among unexhausted classes.
  std::vector<std::size_t> class_order(n_classes);
  std::iota(class_order.begin(), class_order.end(), 0);
  std::shuffle(class_order.begin(), class_order.end(), rng);
  std::vector<std::size_t> quota(n_classes, 0);
  std::size_t remaining = m;
  while (remaining > 0) {
    for (std::size_t k : class_order) {
      if (remaining == 0) break;
      if (quota[k] < by_class[k].size()) {
        ++quota[k];
        --remaining;
      }
    }
  }

  std::vector<std::size_t> picked;
  picked.reserve(m);
  for (std::size_t k = 0; k < n_classes; ++k) {
    picked.insert(picked.end(), by_class[k].begin(),
                  by_class[k].begin() + static_cast<std::ptrdiff_t>(quota[k]));
  }
  std::shuffle(picked.begin(), picked.end(), rng);
  return picked;
}

Dataset select_probe_set(const Dataset& dataset, std::size_t m, std::uint64_t seed) {
  const auto idx = select_probe_indices(dataset.labels, dataset.n_classes, m, seed);
  return dataset.subset(idx);
}

std::uint64_t hash_indices(std::span<const std::size_t> indices) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t v : indices) {
    for (int b = 0; b < 8; ++b) {
      h ^= (static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace fedgeo
