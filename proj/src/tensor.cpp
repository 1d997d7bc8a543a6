#include "r2dsvd/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace r2dsvd {

namespace {

Eigen::Index shape_product(const std::vector<Eigen::Index>& shape) {
  Eigen::Index p = 1;
  for (Eigen::Index d : shape) {
    if (d <= 0) throw std::invalid_argument("DenseTensor: extents must be positive");
    p *= d;
  }
  return p;
}

void check_mode(const DenseTensor& t, int mode) {
  if (mode < 0 || mode >= t.order()) throw std::invalid_argument("tensor: mode out of range");
}

// Row-major strides of the tensor, and of the unfolding's column space
// (remaining axes in ascending order, skipping `mode`).
struct UnfoldPlan {
  std::vector<Eigen::Index> stride;      // per axis, in the tensor
  std::vector<Eigen::Index> col_stride;  // per axis, in the unfolded columns (0 at `mode`)
  Eigen::Index n_cols = 1;
};

UnfoldPlan make_plan(const std::vector<Eigen::Index>& shape, int mode) {
  const int d = static_cast<int>(shape.size());
  UnfoldPlan plan;
  plan.stride.assign(d, 1);
  for (int j = d - 2; j >= 0; --j) plan.stride[j] = plan.stride[j + 1] * shape[j + 1];
  plan.col_stride.assign(d, 0);
  Eigen::Index cs = 1;
  for (int j = d - 1; j >= 0; --j) {
    if (j == mode) continue;
    plan.col_stride[j] = cs;
    cs *= shape[j];
  }
  plan.n_cols = cs;
  return plan;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<Eigen::Index> shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_product(shape_)), 0.0) {}

DenseTensor::DenseTensor(std::vector<Eigen::Index> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (static_cast<Eigen::Index>(values_.size()) != shape_product(shape_))
    throw std::invalid_argument("DenseTensor: value count does not match shape");
}

DenseTensor DenseTensor::from_matrix(const Eigen::MatrixXd& m) {
  DenseTensor t({m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.values_[i * m.cols() + j] = m(i, j);
  return t;
}

Eigen::MatrixXd DenseTensor::to_matrix() const {
  if (order() != 2) throw std::invalid_argument("DenseTensor::to_matrix: order must be 2");
  Eigen::MatrixXd m(shape_[0], shape_[1]);
  for (Eigen::Index i = 0; i < shape_[0]; ++i)
    for (Eigen::Index j = 0; j < shape_[1]; ++j) m(i, j) = values_[i * shape_[1] + j];
  return m;
}

double DenseTensor::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

bool DenseTensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) {
  if (shape_ != other.shape_) throw std::invalid_argument("DenseTensor: shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& other) {
  if (shape_ != other.shape_) throw std::invalid_argument("DenseTensor: shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Eigen::MatrixXd unfold(const DenseTensor& t, int mode) {
  check_mode(t, mode);
  const auto& shape = t.shape();
  const UnfoldPlan plan = make_plan(shape, mode);
  Eigen::MatrixXd m(shape[mode], plan.n_cols);
  const int d = t.order();
  std::vector<Eigen::Index> idx(d, 0);
  for (Eigen::Index flat = 0; flat < t.size(); ++flat) {
    Eigen::Index col = 0;
    for (int j = 0; j < d; ++j) col += idx[j] * plan.col_stride[j];
    m(idx[mode], col) = t[flat];
    for (int j = d - 1; j >= 0; --j) {
      if (++idx[j] < shape[j]) break;
      idx[j] = 0;
    }
  }
  return m;
}

DenseTensor fold(const Eigen::MatrixXd& m, std::vector<Eigen::Index> shape, int mode) {
  if (mode < 0 || mode >= static_cast<int>(shape.size()))
    throw std::invalid_argument("fold: mode out of range");
  shape[static_cast<std::size_t>(mode)] = m.rows();
  const UnfoldPlan plan = make_plan(shape, mode);
  if (m.cols() != plan.n_cols) throw std::invalid_argument("fold: column count mismatch");
  DenseTensor t(shape);
  const int d = t.order();
  std::vector<Eigen::Index> idx(d, 0);
  for (Eigen::Index flat = 0; flat < t.size(); ++flat) {
    Eigen::Index col = 0;
    for (int j = 0; j < d; ++j) col += idx[j] * plan.col_stride[j];
    t[flat] = m(idx[mode], col);
    for (int j = d - 1; j >= 0; --j) {
      if (++idx[j] < shape[j]) break;
      idx[j] = 0;
    }
  }
  return t;
}

DenseTensor n_mode_product(const DenseTensor& t, const Eigen::MatrixXd& matrix, int mode) {
  check_mode(t, mode);
  if (matrix.cols() != t.shape()[static_cast<std::size_t>(mode)])
    throw std::invalid_argument("n_mode_product: matrix columns must match the mode extent");
  const Eigen::MatrixXd prod = matrix * unfold(t, mode);
  return fold(prod, t.shape(), mode);
}

}  // namespace r2dsvd
