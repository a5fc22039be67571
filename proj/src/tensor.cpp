#include "sslab/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sslab {

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.empty() || dims.size() > kMaxRank)
    throw ShapeError("tensor rank must be 1.." + std::to_string(kMaxRank) + ", got " + std::to_string(dims.size()));
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] == 0) throw ShapeError("tensor extents must be positive");
    dims_[i] = dims[i];
  }
  rank_ = dims.size();
}

std::size_t Shape::numel() const {
  if (rank_ == 0) return 0;
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < rank_; ++i) os << (i ? "x" : "") << dims_[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel())
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_.str());
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ContractError("item() requires a single-element tensor, shape " + shape_.str());
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.numel() != data_.size())
    throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
  Tensor t(shape, data_);
  t.node = node;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace sslab
