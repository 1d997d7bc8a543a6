#pragma once

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "r2dsvd/decomp2d.hpp"
#include "r2dsvd/gkrsl.hpp"
#include "r2dsvd/tensor.hpp"

namespace r2dsvd {

/// Robust Tucker-style fit of a set of same-shape tensors: every mode is
/// compressed by an orthonormal factor, the sample index is not.
struct TensorModel {
  std::vector<Eigen::MatrixXd> factors;  // factors[n]: shape[n] x ranks[n]
  std::vector<DenseTensor> cores;
  DenseTensor mean;
  std::vector<double> objective_trace;
  IterationState iteration_state;
  FitDiagnostics diagnostics;
};

struct HoIterationSnapshot {
  int iteration;
  double objective;
  double sigma;
  int damping_level;
  const std::vector<Eigen::MatrixXd>& factors;
  const DenseTensor& mean;
  const std::vector<double>& residuals;
  const std::vector<double>& weights;
  const std::vector<double>& eigen_weights;
};

using HoFitObserver = std::function<void(const HoIterationSnapshot&)>;

/// sqrt(||Xc||^2 - ||core||^2) with the core taken as the full multilinear
/// projection of the centered sample (optimal for orthonormal factors).
double ho_residual(const DenseTensor& sample, const DenseTensor& mean,
                   const std::vector<Eigen::MatrixXd>& factors);

/// GKRSL tensor solver; specializes to gkrsl_svd2d_fit for order-2 samples.
TensorModel ho_gkrsl_fit(const std::vector<DenseTensor>& samples, const std::vector<int>& ranks,
                         const GkrslParams& params, const SolverConfig& config = {},
                         const HoFitObserver& observer = {});

/// Project a sample onto a fitted model's core space.
DenseTensor ho_project(const TensorModel& model, const DenseTensor& sample);

/// mean + core expanded back through the factors.
DenseTensor ho_reconstruct(const TensorModel& model, const DenseTensor& sample);

}  // namespace r2dsvd
