#pragma once

#include <string>
#include <vector>

#include "lrdet/model.hpp"

namespace lrdet {

// Input squeezers from feature squeezing, used as prediction-mismatch detectors.
struct TransformSpec {
  enum class Kind { bit_reduce, median_smooth };
  Kind kind = Kind::bit_reduce;
  int bits = 1;    // bit_reduce: 1..8
  int window = 3;  // median_smooth: odd, >= 3

  void validate() const;
  std::string name() const;  // e.g. "bit_reduce_1", "median_smooth_3"

  static TransformSpec bit_reduce(int bits) { return {Kind::bit_reduce, bits, 3}; }
  static TransformSpec median_smooth(int window) { return {Kind::median_smooth, 1, window}; }
};

// round(x * (2^bits - 1)) / (2^bits - 1), halves rounded up.
Tensor bit_reduce(const Tensor& x, int bits);

// Per-channel k x k median over [B,C,H,W] with edge-replicated borders.
Tensor median_smooth(const Tensor& x, int window);

Tensor apply_transform(const Tensor& x, const TransformSpec& spec);

// L1 distance between softmax(g(x)) and softmax(g(transform(x))), in [0,2].
std::vector<float> mismatch_score(const Classifier& model, const Tensor& x, const TransformSpec& spec);
// 1 when argmax changes under the transform, else 0.
std::vector<float> mismatch_binary(const Classifier& model, const Tensor& x, const TransformSpec& spec);

}  // namespace lrdet
