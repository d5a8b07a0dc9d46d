#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lrdet/tensor.hpp"

namespace lrdet {

// Paired clean/adversarial samples on disk:
//
//   "LRADV1\0"
//   count
//   count x { label, pred, x (rank, dims, f32 data), x_adv (same) }
//
// `pred` is the classifier's prediction on x_adv.
struct AdvRecord {
  std::uint32_t label = 0;
  std::uint32_t pred = 0;
  Tensor x;
  Tensor x_adv;
};

std::vector<unsigned char> encode_adv(const std::vector<AdvRecord>& records);
std::vector<AdvRecord> decode_adv(const std::vector<unsigned char>& bytes);

void save_adv(const std::filesystem::path& path, const std::vector<AdvRecord>& records);
std::vector<AdvRecord> load_adv(const std::filesystem::path& path);

}  // namespace lrdet
