#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace lobexec {

/// A simplex point with a zero component where an interior point is needed.
struct BoundaryPoint : std::domain_error {
  using std::domain_error::domain_error;
};

/// Maps x in R^K to the simplex in R^{K+1}; the last component is the
/// reference category. Max-shifted so large inputs cannot overflow.
std::vector<double> logistic(std::span<const double> x);

/// x^k = log(a^k / a^K) for k < K.
std::vector<double> logistic_inv(std::span<const double> a);

/// log(1 + e^y) without overflow.
double softplus(double y) noexcept;
/// d softplus / dy, the logistic sigmoid.
double softplus_derivative(double y) noexcept;
/// Preimage of a positive value under softplus.
double softplus_inv(double value);

/// Log density of Normal(mean, variance * I) at x.
double normal_log_density(std::span<const double> x, std::span<const double> mean, double variance);

/// Log density of the logistic-normal law at an interior simplex point, for
/// a normal with the given mean and diagonal covariance.
double ln_full_log_density(std::span<const double> a, std::span<const double> mean,
                           std::span<const double> variance_diag);

/// Linear interpolation from sigma_init at i = 1 to sigma_final at i = H.
double variance_schedule(int i, int horizon, double sigma_init, double sigma_final);

/// Log density of Dirichlet(alpha) at a (components clamped to the smallest
/// normal double before taking logs).
double dirichlet_log_density(std::span<const double> a, std::span<const double> alpha);

} // namespace lobexec
