#include "pa/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "pa/error.hpp"

namespace pa {

std::string to_string(const Shape& s) {
  return std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw Error(ErrorKind::Shape, "tensor data has " + std::to_string(data_.size()) +
                                      " elements but shape " + to_string(shape_) + " needs " +
                                      std::to_string(shape_.size()));
  }
}

double Tensor::item() const {
  if (!shape_.is_scalar()) {
    throw Error(ErrorKind::Shape, "item() on non-scalar tensor of shape " + to_string(shape_));
  }
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::clipped(double lo, double hi) const {
  Tensor out = *this;
  for (double& v : out.data_) v = std::clamp(v, lo, hi);
  return out;
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::Shape,
                std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

double max_abs_difference(const Tensor& a, const Tensor& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_difference");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace pa
