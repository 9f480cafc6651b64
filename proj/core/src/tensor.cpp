#include "spnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "spnet/error.hpp"

namespace spnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_dims(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw InvalidShapeError("zero-sized dimension in shape " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw InvalidShapeError("data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_to_string(shape_));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const& {
  BasicTensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) && {
  check_dims(shape);
  if (shape_numel(shape) != data_.size()) {
    throw InvalidShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                            shape_to_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_rank4(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 4) {
    throw InvalidShapeError(std::string(what) + ": expected rank-4 tensor, got " +
                            shape_to_string(t.shape()));
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void require_rank4(const BasicTensor<float>&, const char*);
template void require_rank4(const BasicTensor<double>&, const char*);

}  // namespace spnet
