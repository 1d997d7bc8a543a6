#include "r2dsvd/decomp2d.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace r2dsvd {

void SampleSet::validate() const {
  if (!samples.empty()) {
    const Eigen::Index m = samples.front().rows();
    const Eigen::Index n = samples.front().cols();
    if (m == 0 || n == 0) throw std::invalid_argument("SampleSet: empty matrices");
    for (const auto& x : samples) {
      if (x.rows() != m || x.cols() != n)
        throw std::invalid_argument("SampleSet: samples must share dimensions");
      if (!x.allFinite()) throw std::invalid_argument("SampleSet: non-finite entry");
    }
  }
  if (labels && labels->size() != samples.size())
    throw std::invalid_argument("SampleSet: label count must match sample count");
}

namespace detail {

void fix_eigenvector_signs(Eigen::MatrixXd& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      const double a = std::abs(V(i, j));
      if (a > best) {  // strict: ties keep the lowest index
        best = a;
        arg = i;
      }
    }
    if (V(arg, j) < 0.0) V.col(j) = -V.col(j);
  }
}

Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& C, int k) {
  const Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("top_eigenvectors: eigendecomposition failed");
  const Eigen::MatrixXd& V = es.eigenvectors();  // ascending eigenvalues
  Eigen::MatrixXd out(S.rows(), k);
  for (int j = 0; j < k; ++j) out.col(j) = V.col(S.cols() - 1 - j);
  fix_eigenvector_signs(out);
  return out;
}

double projector_distance(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  return (A * A.transpose() - B * B.transpose()).norm();
}

double adaptive_sigma(const std::vector<double>& residuals) {
  std::vector<double> sq(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i) sq[i] = residuals[i] * residuals[i];
  std::sort(sq.begin(), sq.end());
  const std::size_t n = sq.size();
  const double med = (n % 2 == 1) ? sq[n / 2] : 0.5 * (sq[n / 2 - 1] + sq[n / 2]);
  return std::sqrt(std::max(med / 2.0, 1e-12));
}

}  // namespace detail

namespace {

using detail::adaptive_sigma;
using detail::projector_distance;
using detail::top_eigenvectors;

void check_fit_inputs(const SampleSet& data, RankConfig ranks) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("fit: need at least 2 samples");
  if (ranks.k1 < 1 || ranks.k1 > data.rows() || ranks.k2 < 1 || ranks.k2 > data.cols())
    throw std::invalid_argument("fit: rank out of range");
}

Eigen::MatrixXd arithmetic_mean(const SampleSet& data) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(data.rows(), data.cols());
  for (const auto& x : data.samples) m += x;
  return m / static_cast<double>(data.size());
}

std::vector<double> all_residuals(const SampleSet& data, const Eigen::MatrixXd& mean,
                                  const Eigen::MatrixXd& L, const Eigen::MatrixXd& R) {
  std::vector<double> e(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) e[i] = residual(data.samples[i], mean, L, R);
  return e;
}

std::vector<Eigen::MatrixXd> compute_cores(const SampleSet& data, const Eigen::MatrixXd& mean,
                                           const Eigen::MatrixXd& L, const Eigen::MatrixXd& R) {
  std::vector<Eigen::MatrixXd> cores;
  cores.reserve(data.size());
  for (const auto& x : data.samples) cores.push_back(L.transpose() * (x - mean) * R);
  return cores;
}

// Row covariance sum(w_i Xc_i R R^T Xc_i^T) and its column counterpart.
Eigen::MatrixXd row_covariance(const SampleSet& data, const Eigen::MatrixXd& mean,
                               const Eigen::MatrixXd& R, const std::vector<double>& w) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(data.rows(), data.rows());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::MatrixXd B = (data.samples[i] - mean) * R;
    F.noalias() += w[i] * (B * B.transpose());
  }
  return F;
}

Eigen::MatrixXd col_covariance(const SampleSet& data, const Eigen::MatrixXd& mean,
                               const Eigen::MatrixXd& L, const std::vector<double>& w) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(data.cols(), data.cols());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::MatrixXd B = (data.samples[i] - mean).transpose() * L;
    G.noalias() += w[i] * (B * B.transpose());
  }
  return G;
}

// Shared driver for the reweighted solvers (R1 and GKRSL). A candidate step
// is accepted only if it does not increase the solver's objective at the
// kernel width used to form its weights; rejected steps are retried with the
// mean blended toward the previous iterate and the eigenproblems shifted by
// mu on the previous subspace, which leaves the fixed points unchanged.
struct ReweightedProblem {
  // weights(E, sigma) -> {W, omega}; omega drives the eigenproblems.
  std::function<void(const std::vector<double>&, double, std::vector<double>&,
                     std::vector<double>&)> weights;
  std::function<double(const std::vector<double>&, double)> objective;
  bool adapt_sigma = false;
  double fixed_sigma = 1.0;
  MeanUpdate mean_mode = MeanUpdate::Frozen;
};

constexpr int kMaxDampingLevel = 40;

Decomposition2D run_reweighted(const SampleSet& data, RankConfig ranks,
                               const SolverConfig& config, const ReweightedProblem& prob,
                               Decomposition2D init, const FitObserver& observer) {
  const std::size_t N = data.size();
  Eigen::MatrixXd L = std::move(init.L);
  Eigen::MatrixXd R = std::move(init.R);
  Eigen::MatrixXd mean = std::move(init.mean);
  const Eigen::MatrixXd base_mean = mean;

  Decomposition2D model;
  FitDiagnostics& diag = model.diagnostics;

  std::vector<double> E = all_residuals(data, mean, L, R);
  double sigma = prob.adapt_sigma ? adaptive_sigma(E) : prob.fixed_sigma;
  double f = prob.objective(E, sigma);
  std::vector<double> W(N), omega(N);

  auto notify = [&](int it, int damping) {
    if (!observer) return;
    observer(IterationSnapshot{it, model.objective_trace.back(), sigma, damping, L, R, mean, E,
                               W, omega});
  };

  auto refresh_weights = [&]() {
    prob.weights(E, sigma, W, omega);
    for (std::size_t i = 0; i < N; ++i)
      if (!std::isfinite(W[i]) || !std::isfinite(omega[i]))
        throw std::runtime_error("solver: non-finite weight at iteration " +
                                 std::to_string(diag.iterations));
  };

  refresh_weights();
  model.objective_trace.push_back(f);
  if (!std::isfinite(f)) throw std::runtime_error("solver: non-finite initial objective");
  notify(0, -1);

  for (int it = 1; it <= config.max_iterations; ++it) {
    if (std::all_of(E.begin(), E.end(), [](double e) { return e == 0.0; })) {
      diag.converged = true;  // exact fit, weights would be degenerate
      break;
    }
    double omega_max = 0.0;
    for (double o : omega) omega_max = std::max(omega_max, o);
    if (omega_max == 0.0) {
      diag.stalled = true;
      break;
    }
    // the eigenproblems are invariant under uniform weight scaling; dividing
    // by the peak keeps the covariances finite for extreme loss parameters
    std::vector<double> omega_scaled(N);
    for (std::size_t i = 0; i < N; ++i) omega_scaled[i] = omega[i] / omega_max;

    // candidate mean from this iteration's weights
    IterationState st{E, W, omega, it};
    Eigen::MatrixXd mean_cand;
    if (prob.mean_mode == MeanUpdate::Frozen) {
      mean_cand = base_mean;
    } else {
      MeanUpdateResult mu = update_mean(data, st, prob.mean_mode);
      mean_cand = std::move(mu.mean);
      diag.degenerate_mean = diag.degenerate_mean || mu.degenerate;
    }

    bool accepted = false;
    int level = 0;
    Eigen::MatrixXd Lc, Rc, mean_c;
    std::vector<double> Ec;
    double fc = f;
    for (level = 0; level <= kMaxDampingLevel; ++level) {
      const double theta = std::ldexp(1.0, -level);
      mean_c = theta * mean_cand + (1.0 - theta) * mean;
      Eigen::MatrixXd F = row_covariance(data, mean_c, R, omega_scaled);
      if (level > 0) {
        const double mu = (1.0 / theta - 1.0) * F.norm();
        F.noalias() += mu * (L * L.transpose());
      }
      Lc = top_eigenvectors(F, ranks.k1);
      Eigen::MatrixXd G = col_covariance(data, mean_c, Lc, omega_scaled);
      if (level > 0) {
        const double mu = (1.0 / theta - 1.0) * G.norm();
        G.noalias() += mu * (R * R.transpose());
      }
      Rc = top_eigenvectors(G, ranks.k2);
      Ec = all_residuals(data, mean_c, Lc, Rc);
      fc = prob.objective(Ec, sigma);
      if (!std::isfinite(fc))
        throw std::runtime_error("solver: non-finite objective at iteration " +
                                 std::to_string(it));
      if (fc <= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      diag.stalled = true;
      break;
    }
    if (level > 0) ++diag.damped_steps;

    const double change = std::max(projector_distance(Lc, L), projector_distance(Rc, R));
    L = std::move(Lc);
    R = std::move(Rc);
    mean = std::move(mean_c);
    E = std::move(Ec);
    sigma = prob.adapt_sigma ? adaptive_sigma(E) : prob.fixed_sigma;
    f = prob.objective(E, sigma);
    refresh_weights();
    model.objective_trace.push_back(f);
    diag.iterations = it;
    notify(it, level);
    if (change < config.tolerance) {
      diag.converged = true;
      break;
    }
  }

  model.L = std::move(L);
  model.R = std::move(R);
  model.mean = std::move(mean);
  model.cores = compute_cores(data, model.mean, model.L, model.R);
  model.iteration_state = IterationState{E, W, omega, diag.iterations};
  diag.final_sigma = sigma;
  return model;
}

}  // namespace

double residual(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& mean,
                const Eigen::MatrixXd& L, const Eigen::MatrixXd& R) {
  if (sample.rows() != mean.rows() || sample.cols() != mean.cols() ||
      L.rows() != sample.rows() || R.rows() != sample.cols())
    throw std::invalid_argument("residual: dimension mismatch");
  const Eigen::MatrixXd Xc = sample - mean;
  const double total = Xc.squaredNorm();
  const double captured = (L.transpose() * Xc * R).squaredNorm();
  return std::sqrt(std::max(total - captured, 0.0));
}

Decomposition2D svd2d_fit(const SampleSet& data, RankConfig ranks, const SolverConfig& config) {
  check_fit_inputs(data, ranks);
  const std::size_t N = data.size();

  Decomposition2D model;
  model.mean = arithmetic_mean(data);
  const std::vector<double> ones(N, 1.0);

  // uncoupled start: row covariance without any column projection
  Eigen::MatrixXd C1 = Eigen::MatrixXd::Zero(data.rows(), data.rows());
  for (const auto& x : data.samples) {
    const Eigen::MatrixXd Xc = x - model.mean;
    C1.noalias() += Xc * Xc.transpose();
  }
  model.L = top_eigenvectors(C1, ranks.k1);
  model.R = top_eigenvectors(col_covariance(data, model.mean, model.L, ones), ranks.k2);

  auto objective = [&]() {
    double s = 0.0;
    for (const auto& x : data.samples) {
      const double e = residual(x, model.mean, model.L, model.R);
      s += e * e;
    }
    return s;
  };
  model.objective_trace.push_back(objective());

  for (int it = 1; it <= config.max_iterations; ++it) {
    const Eigen::MatrixXd Lp = model.L;
    const Eigen::MatrixXd Rp = model.R;
    model.L = top_eigenvectors(row_covariance(data, model.mean, model.R, ones), ranks.k1);
    model.R = top_eigenvectors(col_covariance(data, model.mean, model.L, ones), ranks.k2);
    model.objective_trace.push_back(objective());
    model.diagnostics.iterations = it;
    if (std::max(projector_distance(model.L, Lp), projector_distance(model.R, Rp)) <
        config.tolerance) {
      model.diagnostics.converged = true;
      break;
    }
  }

  model.cores = compute_cores(data, model.mean, model.L, model.R);
  std::vector<double> E = all_residuals(data, model.mean, model.L, model.R);
  model.iteration_state = IterationState{E, ones, ones, model.diagnostics.iterations};
  return model;
}

Decomposition2D r1_svd2d_fit(const SampleSet& data, RankConfig ranks, const SolverConfig& config,
                             const FitObserver& observer) {
  check_fit_inputs(data, ranks);
  ReweightedProblem prob;
  prob.weights = [](const std::vector<double>& E, double, std::vector<double>& W,
                    std::vector<double>& omega) {
    for (std::size_t i = 0; i < E.size(); ++i) W[i] = omega[i] = 1.0 / std::max(E[i], 1e-8);
  };
  prob.objective = [](const std::vector<double>& E, double) {
    double s = 0.0;
    for (double e : E) s += e;
    return s;
  };
  prob.mean_mode = MeanUpdate::Frozen;
  return run_reweighted(data, ranks, config, prob, svd2d_fit(data, ranks, config), observer);
}

Decomposition2D gkrsl_svd2d_fit(const SampleSet& data, RankConfig ranks,
                                const GkrslParams& params, const SolverConfig& config,
                                const FitObserver& observer) {
  check_fit_inputs(data, ranks);
  ReweightedProblem prob;
  prob.weights = [&params](const std::vector<double>& E, double sigma, std::vector<double>& W,
                           std::vector<double>& omega) {
    const GkrslParams at{params.lambda, params.p, sigma};
    for (std::size_t i = 0; i < E.size(); ++i) {
      const LossEvaluation ev = evaluate_gkrsl(E[i], at);
      W[i] = ev.weight;
      omega[i] = ev.eigen_weight;
    }
  };
  prob.objective = [&params](const std::vector<double>& E, double sigma) {
    return gkrsl_objective(E, GkrslParams{params.lambda, params.p, sigma});
  };
  prob.adapt_sigma = config.sigma_mode == SigmaMode::Adaptive;
  prob.fixed_sigma = config.sigma;
  prob.mean_mode = config.mean_update;
  return run_reweighted(data, ranks, config, prob, svd2d_fit(data, ranks, config), observer);
}

MeanUpdateResult update_mean(const SampleSet& data, const IterationState& state,
                             MeanUpdate mode) {
  data.validate();
  if (state.residuals.size() != data.size() || state.weights.size() != data.size() ||
      state.eigen_weights.size() != data.size())
    throw std::invalid_argument("update_mean: state length mismatch");

  if (mode == MeanUpdate::Frozen) return {arithmetic_mean(data), false};

  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(data.rows(), data.cols());
  double den = 0.0;
  if (mode == MeanUpdate::Normalized) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double a = state.weights[i] / std::max(state.residuals[i], 1e-8);
      num += a * data.samples[i];
      den += a;
    }
  } else {  // Unnormalized: sum(omega_i X_i) / sum(W_i)
    for (std::size_t i = 0; i < data.size(); ++i) {
      num += state.eigen_weights[i] * data.samples[i];
      den += state.weights[i];
    }
  }
  if (den == 0.0) return {arithmetic_mean(data), true};
  return {num / den, false};
}

Eigen::MatrixXd project(const Decomposition2D& model, const Eigen::MatrixXd& sample) {
  if (sample.rows() != model.mean.rows() || sample.cols() != model.mean.cols())
    throw std::invalid_argument("project: dimension mismatch");
  return model.L.transpose() * (sample - model.mean) * model.R;
}

Eigen::MatrixXd reconstruct(const Decomposition2D& model, const Eigen::MatrixXd& sample) {
  return model.mean + model.L * project(model, sample) * model.R.transpose();
}

}  // namespace r2dsvd
