#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "llie/error.hpp"

namespace llie {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::int64_t size() const { return std::int64_t(n) * c * h * w; }
  std::int64_t plane() const { return std::int64_t(h) * w; }
  bool same_spatial(const Shape& o) const { return h == o.h && w == o.w; }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

/// Dense batch x channel x height x width array (row-major planes, NCHW).
///
/// Storage is a flat Eigen array; `sample(n)` exposes one sample as a
/// channels x (height*width) row-major matrix so convolutions reduce to GEMM,
/// and `plane(n, c)` exposes a single height x width image plane.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using SampleMap = Eigen::Map<RowMatrix<Scalar>>;
  using ConstSampleMap = Eigen::Map<const RowMatrix<Scalar>>;

  Tensor() = default;
  Tensor(int n, int c, int h, int w) : Tensor(Shape{n, c, h, w}) {}
  explicit Tensor(const Shape& shape) : shape_(shape), data_(Storage::Zero(shape.size())) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
      throw Error(ErrorCode::ShapeMismatch, "negative tensor extent " + shape.str());
    }
  }

  static Tensor constant(const Shape& shape, Scalar value) {
    Tensor t(shape);
    t.data_.setConstant(value);
    return t;
  }
  static Tensor scalar(Scalar value) { return constant(Shape{1, 1, 1, 1}, value); }

  const Shape& shape() const { return shape_; }
  int batch() const { return shape_.n; }
  int channels() const { return shape_.c; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Eigen::Index index(int n, int c, int y, int x) const {
    return ((Eigen::Index(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  Scalar& operator()(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  Scalar operator()(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  /// Value of a 1x1x1x1 tensor.
  Scalar item() const { return data_[0]; }

  SampleMap sample(int n) {
    return SampleMap(data_.data() + Eigen::Index(n) * shape_.c * shape_.plane(), shape_.c,
                     shape_.plane());
  }
  ConstSampleMap sample(int n) const {
    return ConstSampleMap(data_.data() + Eigen::Index(n) * shape_.c * shape_.plane(), shape_.c,
                          shape_.plane());
  }
  SampleMap plane(int n, int c) {
    return SampleMap(data_.data() + index(n, c, 0, 0), shape_.h, shape_.w);
  }
  ConstSampleMap plane(int n, int c) const {
    return ConstSampleMap(data_.data() + index(n, c, 0, 0), shape_.h, shape_.w);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.array() = data_.template cast<Other>();
    return out;
  }

  void set_zero() { data_.setZero(); }

  /// Contiguous sub-batch [first, first + count).
  Tensor slice_batch(int first, int count) const {
    Tensor out(count, shape_.c, shape_.h, shape_.w);
    const Eigen::Index per = Eigen::Index(shape_.c) * shape_.plane();
    out.data_ = data_.segment(first * per, count * per);
    return out;
  }

 private:
  Shape shape_{};
  Storage data_;
};

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Stacks batch-1 (or any-batch) tensors of equal C/H/W along the batch axis.
template <typename Scalar>
Tensor<Scalar> concat_batch(const std::vector<Tensor<Scalar>>& parts);

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.array().isFinite().all();
}

}  // namespace llie
