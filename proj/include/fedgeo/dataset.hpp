#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fedgeo/dense_matrix.hpp"
#include "fedgeo/errors.hpp"

namespace fedgeo {

// Images are flattened rows with pixels in [0,1]; labels are class indices.
struct Dataset {
  DenseMatrix images;
  std::vector<int> labels;
  std::size_t n_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return images.cols(); }

  // Rows listed in `indices`, in that order.
  Dataset subset(std::span<const std::size_t> indices) const;
  // Per-class sample counts.
  std::vector<std::size_t> class_counts() const;
};

enum class IdxErrorKind { open_failed, wrong_magic, truncated, count_mismatch };

class IdxError : public DataError {
 public:
  IdxError(IdxErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  IdxErrorKind kind() const { return kind_; }

 private:
  IdxErrorKind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Decodes big-endian IDX buffers. Pixels are divided by 255.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes);

Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path);

// Class-conditional Gaussian blobs: per-class mean ~ U[0.2,0.8]^d, samples are
// mean + 0.1 * N(0,1) clamped to [0,1]. Sample i has label i % n_classes.
Dataset synth_dataset(std::size_t n, std::size_t d, std::size_t n_classes, std::uint64_t seed);

// Splits off the first `n_first` rows; the remainder becomes the second dataset.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, std::size_t n_first);

// Uniform sample of m indices without replacement, stratified so per-class
// counts differ by at most one wherever class sizes allow. Returned order is
// shuffled.
std::vector<std::size_t> select_probe_indices(std::span<const int> labels, std::size_t n_classes,
                                              std::size_t m, std::uint64_t seed);

Dataset select_probe_set(const Dataset& dataset, std::size_t m, std::uint64_t seed);

// Order-sensitive FNV-1a hash of an index list (logged to show the probe is fixed).
std::uint64_t hash_indices(std::span<const std::size_t> indices);

}  // namespace fedgeo
