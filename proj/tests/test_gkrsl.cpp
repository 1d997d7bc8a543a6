#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "r2dsvd/gkrsl.hpp"
#include "r2dsvd/rng.hpp"

using namespace r2dsvd;

namespace {
// five-point central difference of gkrsl_value
double value_derivative_fd(double e, const GkrslParams& params, double h) {
  const auto f = [&](double x) { return gkrsl_value(x, params); };
  return (-f(e + 2 * h) + 8 * f(e + h) - 8 * f(e - h) + f(e - 2 * h)) / (12 * h);
}
}  // namespace

TEST_CASE("params validation and eta") {
  CHECK_THROWS_AS(GkrslParams(0.0, 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GkrslParams(1.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GkrslParams(1.0, 2.0, 0.0), std::invalid_argument);
  CHECK(GkrslParams(8.0, 8.0, 1.0).eta() == std::exp2(-4.0));
  CHECK(GkrslParams(1.0, 2.0, 1.0).eta() == 0.5);
}

TEST_CASE("correntropy kernel") {
  CHECK(correntropy_kernel(0.0, 1.0) == 1.0);
  CHECK(correntropy_kernel(1.0, 1.0) == doctest::Approx(0.60653065971263342).epsilon(1e-14));
  CHECK(correntropy_kernel(60.0, 1.0) < 1e-300);  // tail decay
  CHECK_THROWS_AS(correntropy_kernel(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(correntropy_kernel(1.0, 0.0), std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(correntropy_kernel(inf, 1.0), std::invalid_argument);
}

TEST_CASE("loss value: floor, saturation, frozen point") {
  CHECK(gkrsl_value(0.0, {8.0, 8.0, 1.0}) == doctest::Approx(0.125).epsilon(1e-14));
  // saturation limit exp(lambda)/lambda, reached once the kernel underflows
  CHECK(gkrsl_value(1e9, {0.5, 3.0, 1.0}) ==
        doctest::Approx(3.2974425414002563).epsilon(1e-14));
  CHECK(gkrsl_value(1.0, {2.0, 2.0, 1.0}) ==
        doctest::Approx(1.0983307201031644).epsilon(1e-14));
}

TEST_CASE("loss value: bounds and monotonicity on a grid") {
  SplitMix64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const GkrslParams params{0.5 + 7.5 * rng.next_double(), 0.5 + 7.5 * rng.next_double(),
                             0.2 + 2.0 * rng.next_double()};
    const double lo = 1.0 / params.lambda;
    const double hi = std::exp(params.lambda) / params.lambda;
    double prev = -1.0;
    for (int i = 0; i < 1000; ++i) {
      const double e = 10.0 * params.sigma * i / 999.0;
      const double v = gkrsl_value(e, params);
      CHECK(v >= lo - 1e-15);
      CHECK(v <= hi * (1 + 1e-15));
      CHECK(v >= prev - 1e-12 * std::abs(prev));
      prev = v;
    }
  }
}

TEST_CASE("objective: mean semantics") {
  const GkrslParams p8{8.0, 8.0, 1.0};
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  CHECK(gkrsl_objective(zeros, p8) == doctest::Approx(0.125).epsilon(1e-14));
  const GkrslParams p2{2.0, 2.0, 1.0};
  const std::vector<double> pair{0.0, 1.0};
  CHECK(gkrsl_objective(pair, p2) == doctest::Approx(0.79916536005158222).epsilon(1e-14));
  const std::vector<double> single{0.7};
  CHECK(gkrsl_objective(single, p2) == gkrsl_value(0.7, p2));
  CHECK_THROWS_AS(gkrsl_objective({}, p2), std::invalid_argument);
}

TEST_CASE("weight: zeros, frozen point, tail, p<2 singularity") {
  CHECK(gkrsl_weight(0.0, {8.0, 8.0, 1.0}) == 0.0);
  CHECK(gkrsl_weight(0.0, {2.0, 2.0, 1.0}) == 0.0);
  CHECK(gkrsl_weight(1.0, {2.0, 2.0, 1.0}) ==
        doctest::Approx(1.3323425124936481).epsilon(1e-14));
  CHECK(gkrsl_weight(100.0, {2.0, 2.0, 1.0}) < 1e-300);
  // p < 2 at zero residual: floored by default, domain error when disabled
  CHECK(std::isfinite(gkrsl_weight(0.0, {0.5, 0.5, 1.0})));
  CHECK_THROWS_AS(gkrsl_weight(0.0, {0.5, 0.5, 1.0}, false), std::domain_error);
  CHECK(gkrsl_weight(1e-9, {0.5, 0.5, 1.0}, false) > 0.0);  // only E = 0 is singular
}

TEST_CASE("effective eigen weight: analytic cancellation") {
  CHECK(effective_eigen_weight(0.0, {2.0, 2.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(effective_eigen_weight(1.0, {2.0, 2.0, 1.0}) ==
        doctest::Approx(0.66617125624682406).epsilon(1e-14));
  CHECK(effective_eigen_weight(1e8, {2.0, 4.0, 1.0}) == 0.0);
  CHECK(std::isfinite(effective_eigen_weight(0.0, {0.5, 0.5, 1.0})));

  SplitMix64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const GkrslParams params{0.5 + 7.5 * rng.next_double(), 0.5 + 7.5 * rng.next_double(),
                             0.2 + 2.0 * rng.next_double()};
    const double e = 0.01 + 5.0 * rng.next_double();
    const double w = gkrsl_weight(e, params);
    const double om = effective_eigen_weight(e, params);
    CHECK(w == doctest::Approx(2.0 * e * om).epsilon(1e-12));
    const LossEvaluation ev = evaluate_gkrsl(e, params);
    CHECK(ev.weight == w);
    CHECK(ev.eigen_weight == om);
    CHECK(ev.value == gkrsl_value(e, params));
  }
}

TEST_CASE("p = 2 reduces to the kernel risk sensitive form") {
  SplitMix64 rng(23);
  for (int i = 0; i < 1000; ++i) {
    const double lambda = 0.5 + 7.5 * rng.next_double();
    const double sigma = 0.2 + 2.0 * rng.next_double();
    const double e = 6.0 * sigma * rng.next_double();
    const double krsl =
        std::exp(lambda * (1.0 - std::exp(-e * e / (2 * sigma * sigma)))) / lambda;
    CHECK(gkrsl_value(e, {lambda, 2.0, sigma}) == doctest::Approx(krsl).epsilon(1e-12));
  }
}

TEST_CASE("weight matches the loss derivative up to 1/sigma^2") {
  for (const double lambda : {0.5, 2.0, 8.0}) {
    for (const double p : {0.5, 2.0, 4.0, 8.0}) {
      for (const double sigma : {0.8, 1.6}) {
        const GkrslParams params{lambda, p, sigma};
        const double e_start = p > 4.0 ? 0.3 : 0.1;  // tiny derivatives drown in roundoff
        for (double e = e_start; e <= 5.0; e += 0.1) {
          const double fd = value_derivative_fd(e, params, 1e-4 * std::max(1.0, e));
          const double w = gkrsl_weight(e, params) / (sigma * sigma);
          CHECK(w == doctest::Approx(fd).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("vanishing influence beyond ten bandwidths") {
  for (const double lambda : {0.5, 8.0})
    for (const double p : {0.5, 2.0, 8.0})
      for (const double sigma : {0.5, 2.0}) {
        const GkrslParams params{lambda, p, sigma};
        const double at_sigma = effective_eigen_weight(sigma, params);
        for (const double mult : {10.5, 20.0, 50.0})
          CHECK(effective_eigen_weight(mult * sigma, params) < 1e-6 * at_sigma);
      }
}
