#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lrdet/tensor.hpp"

namespace lrdet {

// Labeled images with pixels in [0,1], stored contiguously.
struct Dataset {
  Shape sample_shape;  // {C,H,W}
  std::vector<float> pixels;
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return shape_numel(sample_shape); }

  // [n, C, H, W] tensor of the selected samples.
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::uint32_t> batch_labels(std::span<const std::size_t> indices) const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
};

// IDX pair: images (magic 0x00000803, count, rows, cols, u8 pixels) and
// labels (magic 0x00000801, count, u8 labels). Pixels are divided by 255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Loads `<dir>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`.
enum class Split { train, test };
Dataset load_idx_dir(const std::filesystem::path& dir, Split split);

void save_idx(const Dataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace lrdet
