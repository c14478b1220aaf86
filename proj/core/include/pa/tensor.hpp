#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pa {

/// Dimensions of a channels x height x width array. Scalars are 1x1x1.
struct Shape {
  std::size_t c = 1;
  std::size_t h = 1;
  std::size_t w = 1;

  std::size_t size() const noexcept { return c * h * w; }
  std::size_t plane() const noexcept { return h * w; }
  bool is_scalar() const noexcept { return c == 1 && h == 1 && w == 1; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Dense row-major C x H x W array of doubles. Images live in [-1, 1].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{}, v); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t c, std::size_t i, std::size_t j) noexcept {
    return data_[(c * shape_.h + i) * shape_.w + j];
  }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const noexcept {
    return data_[(c * shape_.h + i) * shape_.w + j];
  }
  double& operator[](std::size_t k) noexcept { return data_[k]; }
  double operator[](std::size_t k) const noexcept { return data_[k]; }

  /// Value of a 1x1x1 tensor.
  double item() const;

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& vector() const noexcept { return data_; }

  bool all_finite() const noexcept;

  /// Element-wise clamp into [lo, hi].
  Tensor clipped(double lo, double hi) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Throws ErrorKind::Shape unless the two shapes match.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

double max_abs_difference(const Tensor& a, const Tensor& b);

}  // namespace pa
