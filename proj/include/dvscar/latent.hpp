#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvscar/errors.hpp"

namespace dvscar {

// Hyper-parameters of the latent Gaussian AR(1) process
//   lambda_t = mu + phi (lambda_{t-1} - mu) + sigma z_t.
struct ScarParams {
  double mu = 0.0;
  double phi = 0.0;
  double sigma = 1.0;

  bool valid() const noexcept {
    return std::isfinite(mu) && std::abs(phi) < 1.0 && sigma > 0.0 && std::isfinite(sigma);
  }

  void validate() const {
    if (!valid()) throw DomainError("ScarParams: require |phi| < 1 and sigma > 0");
  }

  // Variance of lambda_t under the stationary distribution.
  double stationary_variance() const noexcept { return sigma * sigma / (1.0 - phi * phi); }

  friend bool operator==(const ScarParams&, const ScarParams&) = default;
};

struct StationaryStats {
  double sn = 0.0;    // mu sqrt(1 - phi^2) / sigma
  double avar = 0.0;  // sigma^2 / (1 - phi^2)
};

inline StationaryStats stationary_stats(const ScarParams& p) {
  p.validate();
  return {p.mu * std::sqrt(1.0 - p.phi * p.phi) / p.sigma, p.stationary_variance()};
}

// Simulates lambda_1..lambda_T from given standard normal innovations.
// lambda_1 is drawn from the stationary distribution N(mu, avar).
inline std::vector<double> simulate_path(const ScarParams& p, std::span<const double> noise) {
  p.validate();
  std::vector<double> path(noise.size());
  if (noise.empty()) return path;
  path[0] = p.mu + std::sqrt(p.stationary_variance()) * noise[0];
  for (std::size_t t = 1; t < noise.size(); ++t) {
    path[t] = p.mu + p.phi * (path[t - 1] - p.mu) + p.sigma * noise[t];
  }
  return path;
}

// Unconstrained coordinates (mu, artanh phi, log sigma) used by the optimizer.
inline std::array<double, 3> to_unconstrained(const ScarParams& p) {
  p.validate();
  return {p.mu, std::atanh(p.phi), std::log(p.sigma)};
}

inline ScarParams from_unconstrained(const std::array<double, 3>& x) {
  ScarParams p{x[0], std::tanh(x[1]), std::exp(x[2])};
  // tanh saturates to exactly +-1 in double precision for large arguments.
  constexpr double kMaxPhi = 1.0 - 1e-12;
  if (p.phi > kMaxPhi) p.phi = kMaxPhi;
  if (p.phi < -kMaxPhi) p.phi = -kMaxPhi;
  if (p.sigma < 1e-10) p.sigma = 1e-10;
  return p;
}

}  // namespace dvscar
