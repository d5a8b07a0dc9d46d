#include "lrdet/dataset.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "lrdet/errors.hpp"

namespace lrdet {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4)
    throw IoError(path.string() + ": truncated header at byte offset " + std::to_string(offset) + " (file has " +
                  std::to_string(buf.size()) + " bytes)");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void expect_magic(std::uint32_t got, std::uint32_t want, const std::filesystem::path& path) {
  if (got != want) {
    char msg[96];
    std::snprintf(msg, sizeof msg, ": bad magic 0x%08x at byte offset 0 (expected 0x%08x)", got, want);
    throw IoError(path.string() + msg);
  }
}

void expect_length(std::size_t actual, std::size_t expected, const std::filesystem::path& path) {
  if (actual < expected)
    throw IoError(path.string() + ": truncated, expected " + std::to_string(expected) + " bytes but found " +
                  std::to_string(actual) + " (data ends at byte offset " + std::to_string(actual) + ")");
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  LRDET_REQUIRE(!indices.empty(), "empty batch");
  Shape s{indices.size()};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  const std::size_t n = sample_size();
  std::vector<float> data(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    LRDET_REQUIRE(indices[i] < size(), "sample index " + std::to_string(indices[i]) + " out of range");
    std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n, data.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return Tensor(std::move(s), std::move(data));
}

std::vector<std::uint32_t> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<std::uint32_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{sample_shape, {}, {}};
  const std::size_t n = sample_size();
  out.pixels.reserve(indices.size() * n);
  for (auto i : indices) {
    LRDET_REQUIRE(i < size(), "sample index " + std::to_string(i) + " out of range");
    out.pixels.insert(out.pixels.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i * n),
                      pixels.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  Dataset out{sample_shape, {}, {}};
  out.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(n * sample_size()));
  out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = read_all(images);
  expect_magic(read_be32(ib, 0, images), kImageMagic, images);
  const std::uint32_t count = read_be32(ib, 4, images);
  const std::uint32_t rows = read_be32(ib, 8, images);
  const std::uint32_t cols = read_be32(ib, 12, images);
  if (rows == 0 || cols == 0) throw IoError(images.string() + ": zero image extent in header at byte offset 8");
  const std::size_t pixel_count = std::size_t{count} * rows * cols;
  expect_length(ib.size(), 16 + pixel_count, images);

  const auto lb = read_all(labels);
  expect_magic(read_be32(lb, 0, labels), kLabelMagic, labels);
  const std::uint32_t label_count = read_be32(lb, 4, labels);
  expect_length(lb.size(), 8 + std::size_t{label_count}, labels);
  if (label_count != count)
    throw IoError("count mismatch: " + images.string() + " has " + std::to_string(count) + " images but " +
                  labels.string() + " has " + std::to_string(label_count) + " labels (header byte offset 4)");

  Dataset data{Shape{1, rows, cols}, {}, {}};
  data.pixels.resize(pixel_count);
  for (std::size_t i = 0; i < pixel_count; ++i) data.pixels[i] = static_cast<float>(ib[16 + i]) / 255.0f;
  data.labels.assign(lb.begin() + 8, lb.begin() + 8 + label_count);
  return data;
}

Dataset load_idx_dir(const std::filesystem::path& dir, Split split) {
  const std::string prefix = split == Split::train ? "train" : "t10k";
  return load_idx(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
}

void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  LRDET_REQUIRE(data.sample_shape.size() == 3 && data.sample_shape[0] == 1, "save_idx needs single-channel images");
  std::ofstream im(images, std::ios::binary);
  std::ofstream lb(labels, std::ios::binary);
  if (!im || !lb) throw IoError("cannot write IDX files " + images.string());
  write_be32(im, kImageMagic);
  write_be32(im, static_cast<std::uint32_t>(data.size()));
  write_be32(im, static_cast<std::uint32_t>(data.sample_shape[1]));
  write_be32(im, static_cast<std::uint32_t>(data.sample_shape[2]));
  for (float p : data.pixels) {
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(p, 0.0f, 1.0f) * 255.0f));
    im.put(static_cast<char>(byte));
  }
  write_be32(lb, kLabelMagic);
  write_be32(lb, static_cast<std::uint32_t>(data.size()));
  for (auto l : data.labels) lb.put(static_cast<char>(l));
}

}  // namespace lrdet
