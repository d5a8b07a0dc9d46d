#include "lrdet/baseline.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "lrdet/errors.hpp"
#include "lrdet/ops.hpp"

namespace lrdet {

void TransformSpec::validate() const {
  if (kind == Kind::bit_reduce) {
    LRDET_REQUIRE(bits >= 1 && bits <= 8, "bit depth must lie in 1..8, got " + std::to_string(bits));
  } else {
    LRDET_REQUIRE(window >= 3 && window % 2 == 1, "median window must be odd and >= 3, got " + std::to_string(window));
  }
}

std::string TransformSpec::name() const {
  return kind == Kind::bit_reduce ? "bit_reduce_" + std::to_string(bits) : "median_smooth_" + std::to_string(window);
}

Tensor bit_reduce(const Tensor& x, int bits) {
  TransformSpec::bit_reduce(bits).validate();
  const float levels = static_cast<float>((1 << bits) - 1);
  Tensor out = x;
  for (float& v : out.data()) v = std::floor(v * levels + 0.5f) / levels;
  return out;
}

Tensor median_smooth(const Tensor& x, int window) {
  TransformSpec::median_smooth(window).validate();
  LRDET_REQUIRE(x.rank() == 4, "median_smooth expects [B,C,H,W], got " + shape_str(x.shape()));
  const std::size_t h = x.dim(2), w = x.dim(3), k = static_cast<std::size_t>(window);
  LRDET_REQUIRE(k <= h && k <= w, "median window " + std::to_string(k) + " larger than image " + shape_str(x.shape()));
  const std::ptrdiff_t r = window / 2;
  const std::size_t planes = x.dim(0) * x.dim(1);
  Tensor out(x.shape());
  std::vector<float> buf(k * k);
  const auto mid = static_cast<std::ptrdiff_t>(buf.size() / 2);
  for (std::size_t p = 0; p < planes; ++p) {
    const float* src = x.data().data() + p * h * w;
    float* dst = out.data().data() + p * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        std::size_t n = 0;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(y) + dy, 0,
                                                                               static_cast<std::ptrdiff_t>(h) - 1));
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(xx) + dx, 0,
                                                                                 static_cast<std::ptrdiff_t>(w) - 1));
            buf[n++] = src[sy * w + sx];
          }
        }
        std::nth_element(buf.begin(), buf.begin() + mid, buf.end());
        dst[y * w + xx] = buf[static_cast<std::size_t>(mid)];
      }
  }
  return out;
}

Tensor apply_transform(const Tensor& x, const TransformSpec& spec) {
  spec.validate();
  return spec.kind == TransformSpec::Kind::bit_reduce ? bit_reduce(x, spec.bits) : median_smooth(x, spec.window);
}

namespace {

Tensor probabilities(const Classifier& model, const Tensor& x) { return ops::softmax(Var(model.logits(x))).value(); }

}  // namespace

std::vector<float> mismatch_score(const Classifier& model, const Tensor& x, const TransformSpec& spec) {
  const Tensor p = probabilities(model, x);
  const Tensor q = probabilities(model, apply_transform(x, spec));
  const std::size_t rows = p.dim(0), k = p.dim(1);
  std::vector<float> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    float acc = 0.0f;
    for (std::size_t j = 0; j < k; ++j) acc += std::abs(p[r * k + j] - q[r * k + j]);
    out[r] = std::min(acc, 2.0f);
  }
  return out;
}

std::vector<float> mismatch_binary(const Classifier& model, const Tensor& x, const TransformSpec& spec) {
  const auto a = model.predict(x);
  const auto b = model.predict(apply_transform(x, spec));
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] != b[i] ? 1.0f : 0.0f;
  return out;
}

}  // namespace lrdet
