#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

namespace emasched {

/// y = b0 + b1 x + u_g + e with u_g ~ N(0, sigma_u2), e ~ N(0, sigma_e2).
struct LmmFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double sigma_u2 = 0.0;
  double sigma_e2 = 0.0;
  double lambda = 0.0;  // sigma_u2 / sigma_e2
  double se_beta1 = 0.0;
  double z = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double neg2_log_likelihood = 0.0;
  std::size_t observations = 0;
  std::size_t groups = 0;
  int iterations = 0;
};

/// Generalised least squares at a fixed variance ratio; used by the profile
/// likelihood and exposed for checking the lambda -> 0 limit.
struct GlsResult {
  Eigen::Vector2d beta;
  Eigen::Matrix2d xtvx;  // X' V^-1 X with V = I + lambda Z Z'
  double sigma2 = 0.0;   // profiled residual variance
  double neg2_log_likelihood = 0.0;
};

GlsResult gls_at_lambda(std::span<const double> y, std::span<const double> x, std::span<const std::string> group,
                        double lambda);

/// Maximum likelihood with lambda profiled by golden-section search on log
/// lambda; Wald inference for the slope. Throws "rank-deficient fixed effects"
/// for a constant x.
LmmFit fit_random_intercept_lmm(std::span<const double> y, std::span<const double> x,
                                std::span<const std::string> group, int max_iterations = 200);

}  // namespace emasched
