#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "eegnet/common.hpp"

namespace eegnet {

/// Dense row-major real array. The last axis is contiguous; for signals the
/// time axis always comes last.
struct Tensor {
  Shape shape;
  std::vector<Real> data;
  bool requires_grad = false;
  std::vector<Real> grad;  // same length as data once allocated

  Tensor() = default;

  explicit Tensor(Shape s, Real fill = Real(0))
      : shape(std::move(s)), data(static_cast<size_t>(numel(shape)), fill) {
    check_extents();
  }

  Tensor(Shape s, std::vector<Real> values)
      : shape(std::move(s)), data(std::move(values)) {
    check_extents();
    if (static_cast<long>(data.size()) != numel(shape))
      throw ShapeError("tensor " + shape_str(shape) + " expects " +
                       std::to_string(numel(shape)) + " values, got " +
                       std::to_string(data.size()));
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s)); }

  static Tensor scalar(Real v) { return Tensor(Shape{1}, {v}); }

  long size() const { return static_cast<long>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  long extent(int axis) const { return shape[static_cast<size_t>(axis)]; }

  bool is_scalar() const { return data.size() == 1; }

  Real& at(long i) { return data[static_cast<size_t>(i)]; }
  Real at(long i) const { return data[static_cast<size_t>(i)]; }
  Real& at(long i, long j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
  Real at(long i, long j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
  Real& at(long i, long j, long k) {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }
  Real at(long i, long j, long k) const {
    return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
  }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }

  bool all_finite() const {
    for (Real v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  void check_extents() const {
    for (long e : shape)
      if (e <= 0)
        throw ShapeError("non-positive extent in shape " + shape_str(shape));
  }
};

}  // namespace eegnet
