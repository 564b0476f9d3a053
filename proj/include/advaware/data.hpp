#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advaware/common.hpp"

namespace advaware {

/// (channels, height, width)
struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Normalized image. Pixels are stored flat in channel-major order, each in [0, 1].
struct Image {
  Shape shape;
  VectorXd pixels;
  ClassIndex label = 0;
};

enum class Split { train, test };

struct Dataset {
  std::vector<Image> images;
  int class_count = 2;
  Split split = Split::test;

  [[nodiscard]] std::size_t size() const { return images.size(); }
  [[nodiscard]] bool empty() const { return images.empty(); }
  [[nodiscard]] Shape shape() const { return images.empty() ? Shape{} : images.front().shape; }
  [[nodiscard]] std::size_t feature_dim() const { return shape().size(); }
};

class DataError : public std::runtime_error {
 public:
  enum class Code { io, bad_magic, truncated, count_mismatch, record_size, label_range, bad_argument };

  DataError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] Code code() const { return code_; }

 private:
  Code code_;
};

enum class CifarLabelMode { cifar10, cifar100_fine, cifar100_coarse };

/// Reads an IDX image/label file pair (big-endian headers, ubyte payload).
/// class_count defaults to max label + 1 (at least 2).
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split = Split::test, std::optional<int> class_count = std::nullopt);

/// Reads CIFAR-10 / CIFAR-100 binary batches. Records are concatenated in path order.
Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, CifarLabelMode mode,
                          Split split = Split::test);

[[nodiscard]] std::size_t cifar_record_size(CifarLabelMode mode);
[[nodiscard]] int cifar_class_count(CifarLabelMode mode);

/// Deterministic selection of n images. The selected images keep their
/// original relative order. Stratified mode allocates per-class quotas by
/// largest remainder, so each class gets within one image of its share.
Dataset subsample(const Dataset& d, std::size_t n, std::uint64_t seed, bool stratified);

[[nodiscard]] inline const VectorXd& flatten(const Image& x) { return x.pixels; }

Image unflatten(const VectorXd& v, Shape shape, ClassIndex label = 0);

/// Samples as rows.
MatrixXd feature_matrix(const Dataset& d);
std::vector<ClassIndex> labels_of(const Dataset& d);
std::vector<std::size_t> class_histogram(const Dataset& d);

}  // namespace advaware
