#include "lobexec/policy/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

namespace lobexec {

std::vector<double> logistic(std::span<const double> x) {
  double shift = 0.0;
  for (double v : x) shift = std::max(shift, v);
  std::vector<double> a(x.size() + 1);
  double total = std::exp(-shift);
  for (std::size_t k = 0; k < x.size(); ++k) {
    a[k] = std::exp(x[k] - shift);
    total += a[k];
  }
  a.back() = std::exp(-shift);
  for (double& v : a) v /= total;
  return a;
}

std::vector<double> logistic_inv(std::span<const double> a) {
  if (a.size() < 2) {
    throw std::invalid_argument("logistic_inv needs at least two components");
  }
  for (double v : a) {
    if (!(v > 0.0)) throw BoundaryPoint("logistic_inv: simplex point on the boundary");
  }
  std::vector<double> x(a.size() - 1);
  const double ref = std::log(a.back());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::log(a[k]) - ref;
  return x;
}

double softplus(double y) noexcept { return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y)); }

double softplus_derivative(double y) noexcept {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  const double e = std::exp(y);
  return e / (1.0 + e);
}

double softplus_inv(double value) {
  if (!(value > 0.0)) throw std::domain_error("softplus_inv needs a positive value");
  // log(e^v - 1) = v + log(1 - e^-v)
  return value + std::log(-std::expm1(-value));
}

double normal_log_density(std::span<const double> x, std::span<const double> mean, double variance) {
  if (x.size() != mean.size()) throw std::invalid_argument("normal_log_density: size mismatch");
  if (!(variance > 0.0)) throw std::domain_error("normal_log_density: variance must be positive");
  double sq = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) sq += (x[k] - mean[k]) * (x[k] - mean[k]);
  const double dim = static_cast<double>(x.size());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * variance) - 0.5 * sq / variance;
}

double ln_full_log_density(std::span<const double> a, std::span<const double> mean,
                           std::span<const double> variance_diag) {
  const std::vector<double> x = logistic_inv(a);
  if (mean.size() != x.size() || variance_diag.size() != x.size()) {
    throw std::invalid_argument("ln_full_log_density: size mismatch");
  }
  double log_jacobian = 0.0;
  for (double v : a) log_jacobian += std::log(v);
  double quad = 0.0;
  double log_det = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(variance_diag[k] > 0.0)) throw std::domain_error("ln_full_log_density: variance must be positive");
    quad += (x[k] - mean[k]) * (x[k] - mean[k]) / variance_diag[k];
    log_det += std::log(variance_diag[k]);
  }
  const double dim = static_cast<double>(x.size());
  return -log_jacobian - 0.5 * dim * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * quad;
}

double variance_schedule(int i, int horizon, double sigma_init, double sigma_final) {
  if (horizon < 2 || i < 1 || i > horizon) {
    throw std::invalid_argument("variance_schedule needs 1 <= i <= H and H >= 2 (i=" + std::to_string(i) +
                                ", H=" + std::to_string(horizon) + ")");
  }
  return (sigma_final - sigma_init) * static_cast<double>(i - 1) / static_cast<double>(horizon - 1) + sigma_init;
}

double dirichlet_log_density(std::span<const double> a, std::span<const double> alpha) {
  if (a.size() != alpha.size()) throw std::invalid_argument("dirichlet_log_density: size mismatch");
  double total = 0.0;
  double value = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(alpha[k] > 0.0)) throw std::domain_error("dirichlet_log_density: alpha must be positive");
    total += alpha[k];
    value += (alpha[k] - 1.0) * std::log(std::max(a[k], std::numeric_limits<double>::min()));
    value -= boost::math::lgamma(alpha[k]);
  }
  return value + boost::math::lgamma(total);
}

} // namespace lobexec
