#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <vector>

namespace r2dsvd {

/// Dense real tensor, row-major storage (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<Eigen::Index> shape);
  DenseTensor(std::vector<Eigen::Index> shape, std::vector<double> values);

  static DenseTensor from_matrix(const Eigen::MatrixXd& m);
  Eigen::MatrixXd to_matrix() const;  ///< order-2 tensors only

  int order() const { return static_cast<int>(shape_.size()); }
  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  double operator[](Eigen::Index flat) const { return values_[static_cast<std::size_t>(flat)]; }
  double& operator[](Eigen::Index flat) { return values_[static_cast<std::size_t>(flat)]; }

  double squared_norm() const;
  bool all_finite() const;

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double s);
  friend DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
  friend DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
  friend DenseTensor operator*(double s, DenseTensor t) { return t *= s; }

 private:
  std::vector<Eigen::Index> shape_;
  std::vector<double> values_;
};

/// Mode-n matricization: rows indexed by mode n, columns by the remaining
/// indices in row-major order of the remaining axes. For order 2, mode 0 is
/// the matrix itself and mode 1 its transpose.
Eigen::MatrixXd unfold(const DenseTensor& t, int mode);

/// Inverse of unfold for a result whose mode-n extent is m.rows().
DenseTensor fold(const Eigen::MatrixXd& m, std::vector<Eigen::Index> shape, int mode);

/// n-mode product: fold(matrix * unfold(t, mode)); matrix columns must match
/// shape[mode], the result replaces that extent with matrix rows.
DenseTensor n_mode_product(const DenseTensor& t, const Eigen::MatrixXd& matrix, int mode);

}  // namespace r2dsvd
