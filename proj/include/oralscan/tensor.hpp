#ifndef ORALSCAN_TENSOR_HPP
#define ORALSCAN_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oralscan {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised whenever operand shapes do not conform to an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Reductions over Scalar accumulate in this type (double for float tensors).
template <typename Scalar>
using Accumulator = std::conditional_t<(sizeof(Scalar) < sizeof(double)), double, Scalar>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline Index shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>{});
}

/// Dense row-major array with an explicit shape. Storage is an Eigen column
/// vector so that layers can map slices as matrices without copying.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_ = Vector::Zero(shape_product(shape_));
  }

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static Tensor from_values(Shape shape, std::initializer_list<Scalar> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar x : values) v[i++] = x;
    return Tensor(std::move(shape), std::move(v));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector& values() { return data_; }
  const Vector& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index c, Index h, Index w) { return data_[(c * shape_[1] + h) * shape_[2] + w]; }
  Scalar operator()(Index c, Index h, Index w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  /// Views the tensor as rows x cols (row-major); rows * cols must equal size().
  MatrixMap as_matrix(Index rows, Index cols) {
    require_size(rows * cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap as_matrix(Index rows, Index cols) const {
    require_size(rows * cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_shape(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }

  void require_size(Index n) const {
    if (n != data_.size()) {
      throw ShapeError("cannot view tensor of shape " + shape_string(shape_) + " with " +
                       std::to_string(n) + " elements");
    }
  }

  Shape shape_;
  Vector data_;
};

/// FNV-1a over the raw bytes of the values; used as a parameter fingerprint.
template <typename Scalar>
std::uint64_t checksum(const Tensor<Scalar>& t, std::uint64_t seed = 1469598103934665603ULL) {
  std::uint64_t h = seed;
  const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  const auto n = static_cast<std::size_t>(t.size()) * sizeof(Scalar);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline void require_shape(const Shape& actual, const Shape& expected, const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(actual));
  }
}

}  // namespace oralscan

#endif  // ORALSCAN_TENSOR_HPP
