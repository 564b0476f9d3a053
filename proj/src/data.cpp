#include "advaware/data.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

namespace advaware {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Code::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::size_t kCifarPixels = 3 * 32 * 32;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 Split split, std::optional<int> class_count) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (img.size() < 16 || read_be32(img, 0) != kIdxImageMagic)
    throw DataError(DataError::Code::bad_magic, images_path.string() + ": not an IDX image file");
  if (lab.size() < 8 || read_be32(lab, 0) != kIdxLabelMagic)
    throw DataError(DataError::Code::bad_magic, labels_path.string() + ": not an IDX label file");

  const std::size_t count = read_be32(img, 4);
  const int rows = static_cast<int>(read_be32(img, 8));
  const int cols = static_cast<int>(read_be32(img, 12));
  const std::size_t label_count = read_be32(lab, 4);
  const Shape shape{1, rows, cols};

  if (img.size() - 16 < count * shape.size())
    throw DataError(DataError::Code::truncated, images_path.string() + ": truncated image payload");
  if (lab.size() - 8 < label_count)
    throw DataError(DataError::Code::truncated, labels_path.string() + ": truncated label payload");
  if (count != label_count)
    throw DataError(DataError::Code::count_mismatch,
                    "image count " + std::to_string(count) + " != label count " + std::to_string(label_count));

  Dataset d;
  d.split = split;
  d.images.reserve(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    Image x;
    x.shape = shape;
    x.pixels.resize(static_cast<Eigen::Index>(shape.size()));
    const std::uint8_t* src = img.data() + 16 + i * shape.size();
    for (std::size_t p = 0; p < shape.size(); ++p) x.pixels[static_cast<Eigen::Index>(p)] = src[p] / 255.0;
    x.label = lab[8 + i];
    max_label = std::max(max_label, x.label);
    d.images.push_back(std::move(x));
  }
  d.class_count = class_count.value_or(std::max(2, max_label + 1));
  if (d.class_count < 2) throw DataError(DataError::Code::bad_argument, "class_count must be >= 2");
  if (max_label >= d.class_count)
    throw DataError(DataError::Code::label_range, "label " + std::to_string(max_label) + " >= class_count");
  return d;
}

std::size_t cifar_record_size(CifarLabelMode mode) {
  return (mode == CifarLabelMode::cifar10 ? 1 : 2) + kCifarPixels;
}

int cifar_class_count(CifarLabelMode mode) {
  switch (mode) {
    case CifarLabelMode::cifar10: return 10;
    case CifarLabelMode::cifar100_fine: return 100;
    case CifarLabelMode::cifar100_coarse: return 20;
  }
  return 10;
}

Dataset load_cifar_binary(std::span<const std::filesystem::path> paths, CifarLabelMode mode, Split split) {
  const std::size_t record = cifar_record_size(mode);
  const std::size_t label_bytes = record - kCifarPixels;
  Dataset d;
  d.split = split;
  d.class_count = cifar_class_count(mode);
  for (const auto& path : paths) {
    const auto bytes = read_file(path);
    if (bytes.size() % record != 0)
      throw DataError(DataError::Code::record_size,
                      path.string() + ": length " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(record));
    for (std::size_t off = 0; off < bytes.size(); off += record) {
      // cifar100 records carry (coarse, fine)
      const int label = mode == CifarLabelMode::cifar100_coarse ? bytes[off] : bytes[off + label_bytes - 1];
      if (label >= d.class_count)
        throw DataError(DataError::Code::label_range, path.string() + ": label byte " + std::to_string(label) +
                                                          " out of range");
      Image x;
      x.shape = Shape{3, 32, 32};
      x.label = label;
      x.pixels.resize(static_cast<Eigen::Index>(kCifarPixels));
      for (std::size_t p = 0; p < kCifarPixels; ++p)
        x.pixels[static_cast<Eigen::Index>(p)] = bytes[off + label_bytes + p] / 255.0;
      d.images.push_back(std::move(x));
    }
  }
  return d;
}

Dataset subsample(const Dataset& d, std::size_t n, std::uint64_t seed, bool stratified) {
  if (n == 0 || n > d.size())
    throw DataError(DataError::Code::bad_argument,
                    "subsample size " + std::to_string(n) + " outside [1, " + std::to_string(d.size()) + "]");
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<std::size_t> chosen;
  chosen.reserve(n);

  if (!stratified) {
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.class_count));
    for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.images[i].label)].push_back(i);

    std::vector<std::size_t> quota(by_class.size());
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, class)
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      const std::size_t scaled = by_class[c].size() * n;
      quota[c] = scaled / d.size();
      assigned += quota[c];
      remainders.emplace_back(scaled % d.size(), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++quota[remainders[i].second];

    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto members = by_class[c];
      shuffle(members, rng);
      chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota[c]));
    }
  }

  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  out.class_count = d.class_count;
  out.split = d.split;
  out.images.reserve(n);
  for (auto i : chosen) out.images.push_back(d.images[i]);
  return out;
}

Image unflatten(const VectorXd& v, Shape shape, ClassIndex label) {
  if (static_cast<std::size_t>(v.size()) != shape.size())
    throw DataError(DataError::Code::bad_argument, "vector length does not match shape");
  return Image{shape, v, label};
}

MatrixXd feature_matrix(const Dataset& d) {
  MatrixXd m(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.feature_dim()));
  for (std::size_t i = 0; i < d.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = d.images[i].pixels.transpose();
  return m;
}

std::vector<ClassIndex> labels_of(const Dataset& d) {
  std::vector<ClassIndex> out;
  out.reserve(d.size());
  for (const auto& x : d.images) out.push_back(x.label);
  return out;
}

std::vector<std::size_t> class_histogram(const Dataset& d) {
  std::vector<std::size_t> h(static_cast<std::size_t>(d.class_count), 0);
  for (const auto& x : d.images) ++h[static_cast<std::size_t>(x.label)];
  return h;
}

}  // namespace advaware
