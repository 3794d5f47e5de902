#include "emasched/lmm.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "emasched/stats.hpp"

namespace emasched {

namespace {

struct GroupSums {
  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
};

std::vector<GroupSums> group_sums(std::span<const double> y, std::span<const double> x,
                                  std::span<const std::string> group) {
  if (y.size() != x.size() || y.size() != group.size()) throw std::invalid_argument("y, x and group differ in length");
  if (y.empty()) throw std::invalid_argument("mixed model needs observations");
  std::map<std::string, std::size_t> index;
  std::vector<GroupSums> sums;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i]) || !std::isfinite(x[i])) throw std::invalid_argument("non-finite observation");
    auto [it, inserted] = index.emplace(group[i], sums.size());
    if (inserted) sums.emplace_back();
    auto& g = sums[it->second];
    g.n += 1;
    g.sx += x[i];
    g.sy += y[i];
    g.sxx += x[i] * x[i];
    g.sxy += x[i] * y[i];
    g.syy += y[i] * y[i];
  }
  return sums;
}

GlsResult gls(const std::vector<GroupSums>& sums, double lambda) {
  // V_g^-1 = I - c_g 11' with c_g = lambda / (1 + lambda n_g)
  Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  double yvy = 0.0, logdet = 0.0, n = 0.0;
  for (const auto& g : sums) {
    const double c = lambda / (1.0 + lambda * g.n);
    a(0, 0) += g.n - c * g.n * g.n;
    a(0, 1) += g.sx - c * g.n * g.sx;
    a(1, 1) += g.sxx - c * g.sx * g.sx;
    b(0) += g.sy - c * g.n * g.sy;
    b(1) += g.sxy - c * g.sx * g.sy;
    yvy += g.syy - c * g.sy * g.sy;
    logdet += std::log1p(lambda * g.n);
    n += g.n;
  }
  a(1, 0) = a(0, 1);
  GlsResult r;
  r.xtvx = a;
  r.beta = a.ldlt().solve(b);
  const double rss = yvy - 2.0 * r.beta.dot(b) + r.beta.dot(a * r.beta);
  r.sigma2 = std::max(rss, 0.0) / n;
  constexpr double kTwoPi = 6.283185307179586476925;
  r.neg2_log_likelihood = n * std::log(kTwoPi * r.sigma2) + logdet + n;
  return r;
}

}  // namespace

GlsResult gls_at_lambda(std::span<const double> y, std::span<const double> x, std::span<const std::string> group,
                        double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  return gls(group_sums(y, x, group), lambda);
}

LmmFit fit_random_intercept_lmm(std::span<const double> y, std::span<const double> x,
                                std::span<const std::string> group, int max_iterations) {
  const auto sums = group_sums(y, x, group);
  double xmin = x[0], xmax = x[0];
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  if (xmin == xmax) throw std::invalid_argument("rank-deficient fixed effects");
  if (y.size() < 3) throw std::invalid_argument("mixed model needs at least three observations");

  LmmFit fit;
  fit.observations = y.size();
  fit.groups = sums.size();
  GlsResult best = gls(sums, 0.0);
  double best_lambda = 0.0;
  if (sums.size() >= 2) {
    constexpr double kInvPhi = 0.6180339887498948482;
    double lo = std::log(1e-8), hi = std::log(1e4);
    double c = hi - kInvPhi * (hi - lo), d = lo + kInvPhi * (hi - lo);
    double fc = gls(sums, std::exp(c)).neg2_log_likelihood;
    double fd = gls(sums, std::exp(d)).neg2_log_likelihood;
    int it = 0;
    while (hi - lo > 1e-9 && it < max_iterations) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - kInvPhi * (hi - lo);
        fc = gls(sums, std::exp(c)).neg2_log_likelihood;
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + kInvPhi * (hi - lo);
        fd = gls(sums, std::exp(d)).neg2_log_likelihood;
      }
      ++it;
    }
    fit.iterations = it;
    if (hi - lo > 1e-9)
      throw std::runtime_error("mixed model did not converge after " + std::to_string(it) +
                               " iterations (log lambda bracket [" + std::to_string(lo) + ", " +
                               std::to_string(hi) + "])");
    const double lam = std::exp(0.5 * (lo + hi));
    const GlsResult interior = gls(sums, lam);
    if (interior.neg2_log_likelihood < best.neg2_log_likelihood) {
      best = interior;
      best_lambda = lam;
    }
  }
  if (!std::isfinite(best.neg2_log_likelihood) || !best.beta.allFinite())
    throw std::runtime_error("mixed model produced a non-finite likelihood");

  fit.lambda = best_lambda;
  fit.beta0 = best.beta(0);
  fit.beta1 = best.beta(1);
  fit.sigma_e2 = best.sigma2;
  fit.sigma_u2 = best_lambda * best.sigma2;
  fit.neg2_log_likelihood = best.neg2_log_likelihood;
  const Eigen::Matrix2d cov = best.sigma2 * best.xtvx.inverse();
  fit.se_beta1 = std::sqrt(std::max(cov(1, 1), 0.0));
  fit.z = fit.se_beta1 > 0.0 ? fit.beta1 / fit.se_beta1 : 0.0;
  fit.p = fit.se_beta1 > 0.0 ? normal_two_sided_p(fit.z) : 1.0;
  constexpr double kZ975 = 1.959963984540054;
  fit.ci_low = fit.beta1 - kZ975 * fit.se_beta1;
  fit.ci_high = fit.beta1 + kZ975 * fit.se_beta1;
  return fit;
}

}  // namespace emasched
