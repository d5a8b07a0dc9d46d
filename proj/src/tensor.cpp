#include "lrdet/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "lrdet/errors.hpp"

namespace lrdet {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_) LRDET_REQUIRE(d > 0, "tensor extents must be positive, got " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) LRDET_REQUIRE(d > 0, "tensor extents must be positive, got " + shape_str(shape_));
  LRDET_REQUIRE(shape_numel(shape_) == data_.size(),
                "shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) + " elements");
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{1}, std::vector<float>{value}); }

float Tensor::item() const {
  LRDET_REQUIRE(data_.size() == 1, "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  LRDET_REQUIRE(shape_numel(shape) == data_.size(),
                "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), std::move(data_));
}

std::size_t Tensor::row_size() const {
  LRDET_REQUIRE(!shape_.empty(), "row_size() on rank-0 tensor");
  return data_.size() / shape_[0];
}

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  LRDET_REQUIRE(begin < end && end <= dim(0),
                "row range [" + std::to_string(begin) + "," + std::to_string(end) + ") out of " + shape_str(shape_));
  const std::size_t rs = row_size();
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s), std::vector<float>(data_.begin() + begin * rs, data_.begin() + end * rs));
}

bool Tensor::all_finite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  auto src = t.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0.0f ? 1.0f : (src[i] < 0.0f ? -1.0f : 0.0f);
  return out;
}

Tensor stack(std::span<const Tensor> items) {
  LRDET_REQUIRE(!items.empty(), "stack() of zero tensors");
  Shape s{items.size()};
  s.insert(s.end(), items[0].shape().begin(), items[0].shape().end());
  std::vector<float> data;
  data.reserve(shape_numel(s));
  for (const auto& t : items) {
    LRDET_REQUIRE(t.shape() == items[0].shape(),
                  "stack() shape mismatch: " + shape_str(t.shape()) + " vs " + shape_str(items[0].shape()));
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(std::move(s), std::move(data));
}

}  // namespace lrdet
