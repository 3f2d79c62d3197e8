#include "remul/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>

#include "remul/errors.hpp"

namespace remul {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw ValidationError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw ValidationError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_size(shape_) != data_.size()) {
    throw ValidationError("tensor shape " + shape_string(shape_) + " does not match " +
                          std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return data_.size() / shape_.back();
}

std::size_t Tensor::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  if (data_.size() != 1) throw ValidationError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  // An all-ones exponent marks inf or NaN; the integer loop vectorizes.
  constexpr std::uint64_t exponent = 0x7ff0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : data_) bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & exponent) == exponent);
  return bad == 0;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ValidationError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

}  // namespace remul
