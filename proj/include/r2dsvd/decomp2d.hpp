#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "r2dsvd/gkrsl.hpp"
#include "r2dsvd/sample_set.hpp"

namespace r2dsvd {

struct RankConfig {
  int k1;
  int k2;
};

enum class MeanUpdate {
  Normalized,    ///< convex combination with weights W_i / max(E_i, 1e-8)
  Unnormalized,  ///< ratio form: sum(omega_i X_i) / sum(W_i)
  Frozen,        ///< arithmetic mean, never moved
};

enum class SigmaMode {
  Adaptive,  ///< per iteration, sigma^2 = max(median(E_i^2)/2, 1e-12)
  Fixed,     ///< SolverConfig::sigma throughout
};

struct SolverConfig {
  int max_iterations = 100;
  double tolerance = 1e-5;
  MeanUpdate mean_update = MeanUpdate::Normalized;
  SigmaMode sigma_mode = SigmaMode::Adaptive;
  double sigma = 1.0;  ///< used when sigma_mode == Fixed
  std::uint64_t seed = 0;
};

/// Per-sample state of the reweighted solvers at one iterate.
struct IterationState {
  std::vector<double> residuals;
  std::vector<double> weights;
  std::vector<double> eigen_weights;
  int iteration = 0;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  int damped_steps = 0;    ///< accepted steps that needed proximal damping
  bool stalled = false;    ///< stopped because no damping level descended
  bool degenerate_mean = false;
  double final_sigma = 0.0;
};

/// Fitted two-sided model {L, R, {M_i}, mean} with the solver trace.
struct Decomposition2D {
  Eigen::MatrixXd L;                  // m x k1, orthonormal columns
  Eigen::MatrixXd R;                  // n x k2, orthonormal columns
  std::vector<Eigen::MatrixXd> cores; // k1 x k2, M_i = L^T (X_i - mean) R
  Eigen::MatrixXd mean;               // m x n
  std::vector<double> objective_trace;
  IterationState iteration_state;
  FitDiagnostics diagnostics;
};

/// Snapshot passed to a fit observer after the initial iterate and after each
/// accepted update. damping_level is -1 for the initial snapshot, 0 for an
/// undamped step, j > 0 for a step accepted at blend 2^-j.
struct IterationSnapshot {
  int iteration;
  double objective;
  double sigma;
  int damping_level;
  const Eigen::MatrixXd& L;
  const Eigen::MatrixXd& R;
  const Eigen::MatrixXd& mean;
  const std::vector<double>& residuals;
  const std::vector<double>& weights;
  const std::vector<double>& eigen_weights;
};

using FitObserver = std::function<void(const IterationSnapshot&)>;

/// sqrt(||Xc||_F^2 - ||L^T Xc R||_F^2), clamped at 0; equals the Frobenius
/// distance of Xc to its two-sided projection for orthonormal L, R.
double residual(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& mean,
                const Eigen::MatrixXd& L, const Eigen::MatrixXd& R);

/// Plain two-sided decomposition: arithmetic mean, alternating eigenproblems
/// of the coupled row/column covariances from the uncoupled initialization.
Decomposition2D svd2d_fit(const SampleSet& data, RankConfig ranks, const SolverConfig& config = {});

/// Reweighted variant with w_i = 1 / max(E_i, 1e-8); arithmetic mean.
Decomposition2D r1_svd2d_fit(const SampleSet& data, RankConfig ranks,
                             const SolverConfig& config = {},
                             const FitObserver& observer = {});

/// GKRSL solver: monotone majorization-minimization over (mean, L, R) with
/// per-sample eigen-weights from the loss, initialized from svd2d_fit.
Decomposition2D gkrsl_svd2d_fit(const SampleSet& data, RankConfig ranks,
                                const GkrslParams& params, const SolverConfig& config = {},
                                const FitObserver& observer = {});

struct MeanUpdateResult {
  Eigen::MatrixXd mean;
  bool degenerate = false;  ///< weight sum vanished; arithmetic mean returned
};

/// Mean update from the current iteration state under the selected mode.
MeanUpdateResult update_mean(const SampleSet& data, const IterationState& state, MeanUpdate mode);

/// L^T (sample - mean) R.
Eigen::MatrixXd project(const Decomposition2D& model, const Eigen::MatrixXd& sample);

/// mean + L project(sample) R^T; idempotent on its own output.
Eigen::MatrixXd reconstruct(const Decomposition2D& model, const Eigen::MatrixXd& sample);

namespace detail {
/// Columns of V sign-fixed so each column's largest-magnitude entry is
/// positive (ties broken by lowest row index).
void fix_eigenvector_signs(Eigen::MatrixXd& V);
/// Top-k eigenvectors of (C + C^T)/2, descending eigenvalue order, sign-fixed.
Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& C, int k);
/// max(||L L^T - Lp Lp^T||_F, ||R R^T - Rp Rp^T||_F).
double projector_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);
/// Adaptive kernel width: sqrt(max(median(E^2)/2, 1e-12)).
double adaptive_sigma(const std::vector<double>& residuals);
}  // namespace detail

}  // namespace r2dsvd
