#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lrdet/autodiff.hpp"

// Differentiable tensor operations. Each op computes its forward value and,
// when an operand is tracked, records a node on that operand's tape. Batched
// ops treat the leading axis as the sample axis.
namespace lrdet::ops {

// Elementwise; shapes must match or one side must hold a single element.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float factor);
Var square(const Var& a);
Var relu(const Var& a);  // relu'(0) = 0
Var log(const Var& a);

// [M,K] x [K,N] -> [M,N]
Var matmul(const Var& a, const Var& b);
// x [B,in] * w [in,out] + bias [out]
Var linear(const Var& x, const Var& w, const Var& bias);

enum class Padding { same, valid };
// x [B,C,H,W], w [O,C,k,k], bias [O]; stride 1, zero padding.
Var conv2d(const Var& x, const Var& w, const Var& bias, Padding padding);
// 2x2 window, stride 2; H and W must be even.
Var max_pool2x2(const Var& x);

// Row-wise over [B,K].
Var softmax(const Var& logits);
Var log_softmax(const Var& logits);
// out[b] = x[b, index[b]] for x [B,K].
Var pick(const Var& x, std::span<const std::uint32_t> index);

Var sum(const Var& a);   // -> [1]
Var mean(const Var& a);  // -> [1]
// [B,...] -> [B] mean over each sample's entries.
Var row_mean(const Var& a);

Var reshape(const Var& a, Shape shape);
// [B,...] -> [B, prod(rest)]
Var flatten(const Var& a);
// Columns [begin,end) of x [B,L].
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
// Concatenate [B,L_i] along the column axis.
Var concat_cols(std::span<const Var> parts);

}  // namespace lrdet::ops
