#include "r2dsvd/gkrsl.hpp"

#include <cmath>
#include <stdexcept>

namespace r2dsvd {

namespace {

constexpr double kQFloor = 1e-12;

void check_residual(double e) {
  if (!std::isfinite(e) || e < 0.0)
    throw std::invalid_argument("gkrsl: residual must be finite and non-negative");
}

struct KernelPieces {
  double g;  // exp(-E^2 / 2 sigma^2)
  double q;  // 1 - g, computed via expm1 for small exponents
};

KernelPieces kernel_pieces(double e, double sigma) {
  const double x = (e * e) / (2.0 * sigma * sigma);
  return {std::exp(-x), -std::expm1(-x)};
}

// (p/4) P1 P2 P3; multiply by 2E for the surrogate weight W.
double eigen_weight_pieces(double q, double g, const GkrslParams& params, bool epsilon_floor) {
  const double ex = params.p / 2.0 - 1.0;
  double p2;
  if (ex == 0.0) {
    p2 = 1.0;  // 0^0 := 1, continuous limit of the p = 2 reduction
  } else if (ex > 0.0) {
    p2 = std::pow(q, ex);
  } else {
    if (q < kQFloor) {
      if (!epsilon_floor && q == 0.0)
        throw std::domain_error("gkrsl_weight: singular at E = 0 for p < 2 with floor disabled");
      q = kQFloor;
    }
    p2 = std::pow(q, ex);
  }
  const double p1 = std::exp(params.lambda * std::pow(q, params.p / 2.0));
  return (params.p / 4.0) * p1 * p2 * g;
}

}  // namespace

GkrslParams::GkrslParams(double lambda_, double p_, double sigma_)
    : lambda(lambda_), p(p_), sigma(sigma_) {
  if (!(std::isfinite(lambda) && lambda > 0.0))
    throw std::invalid_argument("GkrslParams: lambda must be finite and positive");
  if (!(std::isfinite(p) && p > 0.0))
    throw std::invalid_argument("GkrslParams: p must be finite and positive");
  if (!(std::isfinite(sigma) && sigma > 0.0))
    throw std::invalid_argument("GkrslParams: sigma must be finite and positive");
}

double GkrslParams::eta() const { return std::exp2(-p / 2.0); }

double correntropy_kernel(double e, double sigma) {
  check_residual(e);
  if (!(std::isfinite(sigma) && sigma > 0.0))
    throw std::invalid_argument("correntropy_kernel: sigma must be finite and positive");
  return kernel_pieces(e, sigma).g;
}

double gkrsl_value(double e, const GkrslParams& params) {
  check_residual(e);
  const auto [g, q] = kernel_pieces(e, params.sigma);
  return std::exp(params.lambda * std::pow(q, params.p / 2.0)) / params.lambda;
}

double gkrsl_objective(std::span<const double> residuals, const GkrslParams& params) {
  if (residuals.empty()) throw std::invalid_argument("gkrsl_objective: empty residual list");
  double sum = 0.0;
  for (double e : residuals) sum += gkrsl_value(e, params);
  return sum / static_cast<double>(residuals.size());
}

double gkrsl_weight(double e_t, const GkrslParams& params, bool epsilon_floor) {
  check_residual(e_t);
  const auto [g, q] = kernel_pieces(e_t, params.sigma);
  return 2.0 * e_t * eigen_weight_pieces(q, g, params, epsilon_floor);
}

double effective_eigen_weight(double e_t, const GkrslParams& params, bool epsilon_floor) {
  check_residual(e_t);
  const auto [g, q] = kernel_pieces(e_t, params.sigma);
  return eigen_weight_pieces(q, g, params, epsilon_floor);
}

LossEvaluation evaluate_gkrsl(double e, const GkrslParams& params, bool epsilon_floor) {
  check_residual(e);
  const auto [g, q] = kernel_pieces(e, params.sigma);
  const double omega = eigen_weight_pieces(q, g, params, epsilon_floor);
  return {std::exp(params.lambda * std::pow(q, params.p / 2.0)) / params.lambda,
          2.0 * e * omega, omega};
}

}  // namespace r2dsvd
