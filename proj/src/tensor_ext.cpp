#include "r2dsvd/tensor_ext.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace r2dsvd {

namespace {

using detail::adaptive_sigma;
using detail::projector_distance;
using detail::top_eigenvectors;

void check_inputs(const std::vector<DenseTensor>& samples, const std::vector<int>& ranks) {
  if (samples.size() < 2) throw std::invalid_argument("ho_gkrsl_fit: need at least 2 samples");
  const auto& shape = samples.front().shape();
  if (shape.empty()) throw std::invalid_argument("ho_gkrsl_fit: samples must have order >= 1");
  for (const auto& s : samples) {
    if (s.shape() != shape) throw std::invalid_argument("ho_gkrsl_fit: shape mismatch");
    if (!s.all_finite()) throw std::invalid_argument("ho_gkrsl_fit: non-finite entry");
  }
  if (ranks.size() != shape.size())
    throw std::invalid_argument("ho_gkrsl_fit: one rank per mode required");
  for (std::size_t j = 0; j < ranks.size(); ++j)
    if (ranks[j] < 1 || ranks[j] > shape[j])
      throw std::invalid_argument("ho_gkrsl_fit: rank out of range");
}

DenseTensor arithmetic_mean(const std::vector<DenseTensor>& samples) {
  DenseTensor m(samples.front().shape());
  for (const auto& s : samples) m += s;
  m *= 1.0 / static_cast<double>(samples.size());
  return m;
}

// Centered sample contracted by V_j^T on every mode except `skip`
// (skip = -1 contracts every mode). Realizes the Z_{-n} contraction without
// materializing the Kronecker product.
DenseTensor contract_except(const DenseTensor& centered,
                            const std::vector<Eigen::MatrixXd>& factors, int skip) {
  DenseTensor t = centered;
  for (int j = 0; j < static_cast<int>(factors.size()); ++j) {
    if (j == skip) continue;
    t = n_mode_product(t, factors[static_cast<std::size_t>(j)].transpose(), j);
  }
  return t;
}

std::vector<double> all_residuals(const std::vector<DenseTensor>& samples,
                                  const DenseTensor& mean,
                                  const std::vector<Eigen::MatrixXd>& factors) {
  std::vector<double> e(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) e[i] = ho_residual(samples[i], mean, factors);
  return e;
}

// Mode-n weighted Gram over centered samples contracted on the other modes.
Eigen::MatrixXd mode_covariance(const std::vector<DenseTensor>& samples, const DenseTensor& mean,
                                const std::vector<Eigen::MatrixXd>& factors, int mode,
                                const std::vector<double>& w) {
  const Eigen::Index dim = samples.front().shape()[static_cast<std::size_t>(mode)];
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Eigen::MatrixXd U = unfold(contract_except(samples[i] - mean, factors, mode), mode);
    H.noalias() += w[i] * (U * U.transpose());
  }
  return H;
}

// Uniform-weight alternating init, the tensor analogue of svd2d_fit: factors
// seeded mode by mode from the progressively contracted Grams, then cyclic
// sweeps until the projector metric settles.
std::vector<Eigen::MatrixXd> hooi_init(const std::vector<DenseTensor>& samples,
                                       const DenseTensor& mean, const std::vector<int>& ranks,
                                       const SolverConfig& config) {
  const int order = samples.front().order();
  const std::vector<double> ones(samples.size(), 1.0);
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(order);
  for (int n = 0; n < order; ++n) {
    const Eigen::Index dim = samples.front().shape()[static_cast<std::size_t>(n)];
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& s : samples) {
      DenseTensor t = s - mean;
      for (int j = 0; j < n; ++j)
        t = n_mode_product(t, factors[static_cast<std::size_t>(j)].transpose(), j);
      const Eigen::MatrixXd U = unfold(t, n);
      H.noalias() += U * U.transpose();
    }
    factors.push_back(top_eigenvectors(H, ranks[static_cast<std::size_t>(n)]));
  }
  for (int it = 1; it <= config.max_iterations; ++it) {
    double change = 0.0;
    for (int n = 0; n < order; ++n) {
      const Eigen::MatrixXd prev = factors[static_cast<std::size_t>(n)];
      factors[static_cast<std::size_t>(n)] = top_eigenvectors(
          mode_covariance(samples, mean, factors, n, ones), ranks[static_cast<std::size_t>(n)]);
      change = std::max(change, projector_distance(factors[static_cast<std::size_t>(n)], prev));
    }
    if (change < config.tolerance) break;
  }
  return factors;
}

}  // namespace

double ho_residual(const DenseTensor& sample, const DenseTensor& mean,
                   const std::vector<Eigen::MatrixXd>& factors) {
  if (sample.shape() != mean.shape()) throw std::invalid_argument("ho_residual: shape mismatch");
  if (static_cast<int>(factors.size()) != sample.order())
    throw std::invalid_argument("ho_residual: one factor per mode required");
  const DenseTensor centered = sample - mean;
  const DenseTensor core = contract_except(centered, factors, -1);
  return std::sqrt(std::max(centered.squared_norm() - core.squared_norm(), 0.0));
}

TensorModel ho_gkrsl_fit(const std::vector<DenseTensor>& samples, const std::vector<int>& ranks,
                         const GkrslParams& params, const SolverConfig& config,
                         const HoFitObserver& observer) {
  check_inputs(samples, ranks);
  const std::size_t N = samples.size();
  const int order = samples.front().order();

  TensorModel model;
  FitDiagnostics& diag = model.diagnostics;
  DenseTensor mean = arithmetic_mean(samples);
  const DenseTensor base_mean = mean;
  std::vector<Eigen::MatrixXd> factors = hooi_init(samples, mean, ranks, config);

  const bool adapt = config.sigma_mode == SigmaMode::Adaptive;
  auto objective = [&params](const std::vector<double>& E, double sigma) {
    return gkrsl_objective(E, GkrslParams{params.lambda, params.p, sigma});
  };

  std::vector<double> E = all_residuals(samples, mean, factors);
  double sigma = adapt ? adaptive_sigma(E) : config.sigma;
  double f = objective(E, sigma);
  std::vector<double> W(N), omega(N);

  auto refresh_weights = [&]() {
    const GkrslParams at{params.lambda, params.p, sigma};
    for (std::size_t i = 0; i < N; ++i) {
      const LossEvaluation ev = evaluate_gkrsl(E[i], at);
      W[i] = ev.weight;
      omega[i] = ev.eigen_weight;
      if (!std::isfinite(W[i]))
        throw std::runtime_error("ho_gkrsl_fit: non-finite weight at iteration " +
                                 std::to_string(diag.iterations));
    }
  };

  auto notify = [&](int it, int damping) {
    if (!observer) return;
    observer(HoIterationSnapshot{it, model.objective_trace.back(), sigma, damping, factors, mean,
                                 E, W, omega});
  };

  refresh_weights();
  if (!std::isfinite(f)) throw std::runtime_error("ho_gkrsl_fit: non-finite initial objective");
  model.objective_trace.push_back(f);
  notify(0, -1);

  for (int it = 1; it <= config.max_iterations; ++it) {
    if (std::all_of(E.begin(), E.end(), [](double e) { return e == 0.0; })) {
      diag.converged = true;
      break;
    }
    double omega_max = 0.0;
    for (double o : omega) omega_max = std::max(omega_max, o);
    if (omega_max == 0.0) {
      diag.stalled = true;
      break;
    }
    // same uniform rescaling as the matrix engine: keeps H finite
    std::vector<double> omega_scaled(N);
    for (std::size_t i = 0; i < N; ++i) omega_scaled[i] = omega[i] / omega_max;

    DenseTensor mean_cand = base_mean;
    if (config.mean_update != MeanUpdate::Frozen) {
      DenseTensor num(mean.shape());
      double den = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        if (config.mean_update == MeanUpdate::Normalized) {
          const double a = W[i] / std::max(E[i], 1e-8);
          num += a * DenseTensor(samples[i]);
          den += a;
        } else {
          num += omega[i] * DenseTensor(samples[i]);
          den += W[i];
        }
      }
      if (den == 0.0) {
        mean_cand = base_mean;
        diag.degenerate_mean = true;
      } else {
        num *= 1.0 / den;
        mean_cand = std::move(num);
      }
    }

    bool accepted = false;
    int level = 0;
    DenseTensor mean_c;
    std::vector<Eigen::MatrixXd> factors_c;
    std::vector<double> Ec;
    for (level = 0; level <= 40; ++level) {
      const double theta = std::ldexp(1.0, -level);
      mean_c = mean;
      mean_c *= (1.0 - theta);
      {
        DenseTensor scaled = mean_cand;
        scaled *= theta;
        mean_c += scaled;
      }
      factors_c = factors;
      for (int n = 0; n < order; ++n) {
        Eigen::MatrixXd H = mode_covariance(samples, mean_c, factors_c, n, omega_scaled);
        if (level > 0) {
          const double mu = (1.0 / theta - 1.0) * H.norm();
          const Eigen::MatrixXd& prev = factors[static_cast<std::size_t>(n)];
          H.noalias() += mu * (prev * prev.transpose());
        }
        factors_c[static_cast<std::size_t>(n)] =
            top_eigenvectors(H, ranks[static_cast<std::size_t>(n)]);
      }
      Ec = all_residuals(samples, mean_c, factors_c);
      const double fc = objective(Ec, sigma);
      if (!std::isfinite(fc))
        throw std::runtime_error("ho_gkrsl_fit: non-finite objective at iteration " +
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

    double change = 0.0;
    for (int n = 0; n < order; ++n)
      change = std::max(change, projector_distance(factors_c[static_cast<std::size_t>(n)],
                                                   factors[static_cast<std::size_t>(n)]));
    factors = std::move(factors_c);
    mean = std::move(mean_c);
    E = std::move(Ec);
    sigma = adapt ? adaptive_sigma(E) : config.sigma;
    f = objective(E, sigma);
    refresh_weights();
    model.objective_trace.push_back(f);
    diag.iterations = it;
    notify(it, level);
    if (change < config.tolerance) {
      diag.converged = true;
      break;
    }
  }

  model.factors = std::move(factors);
  model.mean = std::move(mean);
  model.cores.reserve(N);
  for (const auto& s : samples)
    model.cores.push_back(contract_except(s - model.mean, model.factors, -1));
  model.iteration_state = IterationState{E, W, omega, diag.iterations};
  diag.final_sigma = sigma;
  return model;
}

DenseTensor ho_project(const TensorModel& model, const DenseTensor& sample) {
  if (sample.shape() != model.mean.shape())
    throw std::invalid_argument("ho_project: shape mismatch");
  return contract_except(sample - model.mean, model.factors, -1);
}

DenseTensor ho_reconstruct(const TensorModel& model, const DenseTensor& sample) {
  DenseTensor t = ho_project(model, sample);
  for (int n = 0; n < static_cast<int>(model.factors.size()); ++n)
    t = n_mode_product(t, model.factors[static_cast<std::size_t>(n)], n);
  return t + model.mean;
}

}  // namespace r2dsvd
