#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lrdet/tensor.hpp"

namespace lrdet {

// On-disk layout (all integers little-endian u32, floats little-endian f32):
//
//   "LRCKPT1\0"
//   count
//   count x { name_len, name bytes, rank, dims[rank], data[prod(dims)] }
//   meta_len, meta bytes (UTF-8 JSON)
//
// Classifiers store their architecture in the metadata; detectors store their
// tap spec there.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string metadata = "{}";

  const Tensor& get(const std::string& name) const;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lrdet
