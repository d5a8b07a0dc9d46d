#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lrdet {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major float32 array. Plain value type: copying copies the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float value);
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0f); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& vec() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Value of a single-element tensor.
  float item() const;

  // Same data, new shape with identical element count.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  // Rows [begin, end) along the leading axis.
  Tensor rows(std::size_t begin, std::size_t end) const;
  // Flat extent of one leading-axis row.
  std::size_t row_size() const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Entrywise -1/0/+1 with sign(0) = 0. Never part of a gradient tape.
Tensor sign(const Tensor& t);

// Stack equally-shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

}  // namespace lrdet
