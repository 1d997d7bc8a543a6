#pragma once

#include <span>

namespace r2dsvd {

/// Hyperparameters of the generalized kernel risk sensitive loss
///   f(E) = (1/lambda) * exp(lambda * (1 - exp(-E^2 / 2 sigma^2))^(p/2)).
/// lambda controls convexity, p the error order, sigma the kernel bandwidth.
struct GkrslParams {
  double lambda;
  double p;
  double sigma;

  GkrslParams(double lambda, double p, double sigma);

  /// Derived constant 2^(-p/2).
  double eta() const;
};

/// Per-sample loss value together with the two iteratively-reweighted
/// multipliers derived from it.
struct LossEvaluation {
  double value;         ///< f(E), in [1/lambda, exp(lambda)/lambda]
  double weight;        ///< W = (p/2) P1 P2 P3 E
  double eigen_weight;  ///< omega = W / (2E) = (p/4) P1 P2 P3, 0/0 resolved analytically
};

/// Gaussian kernel exp(-E^2 / (2 sigma^2)); 1 iff E == 0.
double correntropy_kernel(double e, double sigma);

/// Loss value f(E). Bounded: 1/lambda at E = 0, exp(lambda)/lambda as E -> inf.
double gkrsl_value(double e, const GkrslParams& params);

/// Mean of gkrsl_value over a non-empty residual list.
double gkrsl_objective(std::span<const double> residuals, const GkrslParams& params);

/// Surrogate weight W = (p/2) P1 P2 P3 E with
///   P1 = exp(lambda (1-g)^(p/2)), P2 = (1-g)^(p/2-1), P3 = g.
/// P2 uses the 0^0 := 1 convention at p = 2. For p < 2 the factor (1-g) is
/// floored at 1e-12 before the negative power; with epsilon_floor disabled,
/// E = 0 throws std::domain_error.
double gkrsl_weight(double e_t, const GkrslParams& params, bool epsilon_floor = true);

/// Eigenproblem weight (p/4) P1 P2 P3, the analytic cancellation of W/(2E);
/// finite at E = 0 for p >= 2.
double effective_eigen_weight(double e_t, const GkrslParams& params, bool epsilon_floor = true);

/// value, weight and eigen-weight in one pass.
LossEvaluation evaluate_gkrsl(double e, const GkrslParams& params, bool epsilon_floor = true);

}  // namespace r2dsvd
