#pragma once

// Bivariate one-parameter copula families used as vine building blocks,
// together with the maps between the copula parameter, Kendall's tau and
// the latent (Fisher) scale.
//
// Convention: h(u | v) = dC(u, v)/dv. All families here are exchangeable,
// so conditioning on the first argument uses the same function with the
// arguments swapped.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "dvscar/errors.hpp"

namespace dvscar {

enum class Family { Gaussian, Clayton, Gumbel, SurvivalClayton, SurvivalGumbel, Independence };

// Candidate families in tie-break order (N < C < G < SC < SG).
inline constexpr std::array<Family, 5> kParametricFamilies = {
    Family::Gaussian, Family::Clayton, Family::Gumbel, Family::SurvivalClayton,
    Family::SurvivalGumbel};

// Copula data are clamped to [kUnitClamp, 1 - kUnitClamp].
inline constexpr double kUnitClamp = 1e-10;
// Kendall's tau is kept at least this far from the boundary of its domain.
inline constexpr double kTauClamp = 1e-5;

inline std::string_view family_code(Family f) {
  switch (f) {
    case Family::Gaussian: return "N";
    case Family::Clayton: return "C";
    case Family::Gumbel: return "G";
    case Family::SurvivalClayton: return "SC";
    case Family::SurvivalGumbel: return "SG";
    case Family::Independence: return "I";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view code) {
  for (Family f : {Family::Gaussian, Family::Clayton, Family::Gumbel, Family::SurvivalClayton,
                   Family::SurvivalGumbel, Family::Independence}) {
    if (family_code(f) == code) return f;
  }
  return std::nullopt;
}

inline bool is_survival(Family f) {
  return f == Family::SurvivalClayton || f == Family::SurvivalGumbel;
}

// Unrotated counterpart of a survival family; identity otherwise.
inline Family base_family(Family f) {
  if (f == Family::SurvivalClayton) return Family::Clayton;
  if (f == Family::SurvivalGumbel) return Family::Gumbel;
  return f;
}

// Clayton, Gumbel and their rotations only admit positive dependence.
inline bool positive_only(Family f) {
  return f != Family::Gaussian && f != Family::Independence;
}

inline double clamp_unit(double u) { return std::clamp(u, kUnitClamp, 1.0 - kUnitClamp); }

// ---------------------------------------------------------------------------
// Standard normal helpers

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double norm_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// ---------------------------------------------------------------------------
// Latent scale

// Inverse Fisher transform, maps the real line onto (-1, 1).
inline double fisher_inv(double lambda) { return std::tanh(lambda); }

inline double fisher(double tau) {
  if (!(std::abs(tau) < 1.0)) throw DomainError("fisher: |tau| must be < 1");
  return std::atanh(tau);
}

// Admissible Kendall's tau interval after clamping.
inline std::pair<double, double> tau_bounds(Family f) {
  if (positive_only(f)) return {kTauClamp, 1.0 - kTauClamp};
  return {-1.0 + kTauClamp, 1.0 - kTauClamp};
}

inline double clamp_tau(Family f, double tau) {
  auto [lo, hi] = tau_bounds(f);
  return std::clamp(tau, lo, hi);
}

// theta = r(tau). Values inside the clamp band are pulled onto it; anything
// further outside is a domain error.
inline double tau_to_theta(Family f, double tau) {
  if (f == Family::Independence) return 0.0;
  if (!(std::abs(tau) < 1.0)) throw DomainError("tau_to_theta: |tau| must be < 1");
  if (positive_only(f) && tau < 0.0) {
    throw DomainError("tau_to_theta: family " + std::string(family_code(f)) +
                      " requires tau > 0");
  }
  tau = clamp_tau(f, tau);
  switch (base_family(f)) {
    case Family::Gaussian: return std::sin(0.5 * std::numbers::pi * tau);
    case Family::Clayton: return 2.0 * tau / (1.0 - tau);
    case Family::Gumbel: return 1.0 / (1.0 - tau);
    default: return 0.0;
  }
}

inline void check_theta(Family f, double theta) {
  bool ok = true;
  switch (base_family(f)) {
    case Family::Gaussian: ok = std::abs(theta) < 1.0; break;
    case Family::Clayton: ok = theta > 0.0 && std::isfinite(theta); break;
    case Family::Gumbel: ok = theta >= 1.0 && std::isfinite(theta); break;
    default: break;
  }
  if (!ok) {
    throw DomainError("theta " + std::to_string(theta) + " outside domain of family " +
                      std::string(family_code(f)));
  }
}

inline double theta_to_tau(Family f, double theta) {
  if (f == Family::Independence) return 0.0;
  check_theta(f, theta);
  switch (base_family(f)) {
    case Family::Gaussian: return 2.0 / std::numbers::pi * std::asin(theta);
    case Family::Clayton: return theta / (theta + 2.0);
    case Family::Gumbel: return 1.0 - 1.0 / theta;
    default: return 0.0;
  }
}

// Copula parameter implied by a latent state: theta = r(clamp(psi(lambda))).
inline double theta_from_latent(Family f, double lambda) {
  if (f == Family::Independence) return 0.0;
  return tau_to_theta(f, clamp_tau(f, fisher_inv(lambda)));
}

namespace detail {

// log(e^a + e^b - 1) for a, b >= 0 without overflow.
inline double log_sum_exp_m1(double a, double b) {
  double m = std::max(a, b);
  double n = std::min(a, b);
  if (n < 700.0) return m + std::log1p(std::exp(-m) * std::expm1(n));
  return m + std::log1p(std::exp(n - m) - std::exp(-m));
}

// log(e^a + e^b)
inline double log_add_exp(double a, double b) {
  double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Clamp theta that is only marginally outside the domain.
inline double admissible_theta(Family f, double theta) {
  check_theta(f, theta);
  switch (base_family(f)) {
    case Family::Gaussian: {
      double r = std::sin(0.5 * std::numbers::pi * (1.0 - kTauClamp));
      return std::clamp(theta, -r, r);
    }
    case Family::Clayton: return std::max(theta, tau_to_theta(Family::Clayton, kTauClamp));
    case Family::Gumbel: return std::max(theta, 1.0);
    default: return theta;
  }
}

inline double gaussian_log_density(double x, double y, double rho) {
  double r2 = rho * rho;
  double om = 1.0 - r2;
  return -0.5 * std::log(om) - (r2 * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * om);
}

inline double clayton_log_density(double log_u, double log_v, double theta) {
  double l = log_sum_exp_m1(-theta * log_u, -theta * log_v);
  return std::log1p(theta) - (1.0 + theta) * (log_u + log_v) - (2.0 + 1.0 / theta) * l;
}

// x = -log u, y = -log v, lx = log x, ly = log y.
inline double gumbel_log_density(double x, double y, double lx, double ly, double theta) {
  double s = log_add_exp(theta * lx, theta * ly);
  double a = std::exp(s / theta);
  return -a + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * s +
         std::log(a + theta - 1.0);
}

inline double base_log_density(Family base, double u, double v, double theta) {
  switch (base) {
    case Family::Gaussian:
      return gaussian_log_density(norm_quantile(u), norm_quantile(v), theta);
    case Family::Clayton: return clayton_log_density(std::log(u), std::log(v), theta);
    case Family::Gumbel: {
      double x = -std::log(u), y = -std::log(v);
      return gumbel_log_density(x, y, std::log(x), std::log(y), theta);
    }
    default: return 0.0;
  }
}

// Bivariate standard normal cdf via the arcsine form of Plackett's identity.
inline double bivariate_normal_cdf(double x, double y, double rho) {
  double base = norm_cdf(x) * norm_cdf(y);
  if (rho == 0.0) return base;
  double upper = std::asin(rho);
  auto integrand = [&](double s) {
    double c = std::cos(s);
    return std::exp(-(x * x + y * y - 2.0 * x * y * std::sin(s)) / (2.0 * c * c));
  };
  double integral = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, 0.0, upper, 15, 1e-14);
  return base + integral / (2.0 * std::numbers::pi);
}

inline double base_cdf(Family base, double u, double v, double theta) {
  switch (base) {
    case Family::Gaussian:
      return bivariate_normal_cdf(norm_quantile(u), norm_quantile(v), theta);
    case Family::Clayton:
      return std::exp(-log_sum_exp_m1(-theta * std::log(u), -theta * std::log(v)) / theta);
    case Family::Gumbel: {
      double x = -std::log(u), y = -std::log(v);
      double s = log_add_exp(theta * std::log(x), theta * std::log(y));
      return std::exp(-std::exp(s / theta));
    }
    default: return u * v;
  }
}

inline double base_h(Family base, double u, double v, double theta) {
  switch (base) {
    case Family::Gaussian: {
      double x = norm_quantile(u), y = norm_quantile(v);
      return norm_cdf((x - theta * y) / std::sqrt(1.0 - theta * theta));
    }
    case Family::Clayton: {
      double lv = std::log(v);
      double l = log_sum_exp_m1(-theta * std::log(u), -theta * lv);
      return std::exp(-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * l);
    }
    case Family::Gumbel: {
      double x = -std::log(u), y = -std::log(v);
      double ly = std::log(y);
      double s = log_add_exp(theta * std::log(x), theta * ly);
      double a = std::exp(s / theta);
      return std::exp(-a + y + (theta - 1.0) * ly + (1.0 / theta - 1.0) * s);
    }
    default: return u;
  }
}

// Safeguarded Newton on u with bisection fallback; dh/du is the density.
inline double newton_h_inverse(Family base, double p, double v, double theta) {
  double lo = 0.0, hi = 1.0;
  double u = std::clamp(p, kUnitClamp, 1.0 - kUnitClamp);
  for (int it = 0; it < 100; ++it) {
    double f = base_h(base, u, v, theta) - p;
    if (std::abs(f) <= 1e-15) return u;
    if (f < 0.0) lo = u; else hi = u;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(u, 1e-300)) return u;
    double dens = std::exp(base_log_density(base, u, v, theta));
    double next = u - f / dens;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - u) <= 1e-16 * std::max(u, 1e-300)) return next;
    u = next;
  }
  double resid = std::abs(base_h(base, u, v, theta) - p);
  if (resid > 1e-10) {
    throw ConvergenceError("h_inverse: no convergence (theta=" + std::to_string(theta) + ")");
  }
  return u;
}

inline double base_h_inverse(Family base, double p, double v, double theta) {
  switch (base) {
    case Family::Gaussian: {
      double z = norm_quantile(p), y = norm_quantile(v);
      return norm_cdf(z * std::sqrt(1.0 - theta * theta) + theta * y);
    }
    case Family::Clayton: {
      // u^-t = (p v^(t+1))^(-t/(1+t)) + 1 - v^-t, evaluated on the log scale.
      double lv = std::log(v);
      double a = -theta / (1.0 + theta) * (std::log(p) + (theta + 1.0) * lv);
      double b = -theta * lv;
      // log(e^a - e^b + 1); a >= b since log p <= 0.
      double w = a + std::log(-std::expm1(b - a) + std::exp(-a));
      return std::exp(-w / theta);
    }
    case Family::Gumbel: return newton_h_inverse(base, p, v, theta);
    default: return p;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public pair-copula functions. Arguments u, v are clamped to the open unit
// interval before evaluation.

inline double pair_log_density(Family f, double u, double v, double theta) {
  if (f == Family::Independence) return 0.0;
  theta = detail::admissible_theta(f, theta);
  u = clamp_unit(u);
  v = clamp_unit(v);
  if (is_survival(f)) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return detail::base_log_density(base_family(f), u, v, theta);
}

inline double pair_density(Family f, double u, double v, double theta) {
  return std::exp(pair_log_density(f, u, v, theta));
}

inline double pair_cdf(Family f, double u, double v, double theta) {
  if (u <= 0.0 || v <= 0.0) return 0.0;
  if (u >= 1.0) return std::min(v, 1.0);
  if (v >= 1.0) return u;
  if (f == Family::Independence) return u * v;
  theta = detail::admissible_theta(f, theta);
  u = clamp_unit(u);
  v = clamp_unit(v);
  if (is_survival(f)) {
    return u + v - 1.0 + detail::base_cdf(base_family(f), 1.0 - u, 1.0 - v, theta);
  }
  return detail::base_cdf(f, u, v, theta);
}

// Conditional cdf h(u | v) = dC(u, v)/dv.
inline double h_func(Family f, double u, double v, double theta) {
  if (f == Family::Independence) return clamp_unit(u);
  theta = detail::admissible_theta(f, theta);
  u = clamp_unit(u);
  v = clamp_unit(v);
  double h = is_survival(f) ? 1.0 - detail::base_h(base_family(f), 1.0 - u, 1.0 - v, theta)
                            : detail::base_h(f, u, v, theta);
  return clamp_unit(h);
}

// Solves h(u | v) = p for u.
inline double h_inverse(Family f, double p, double v, double theta) {
  if (f == Family::Independence) return clamp_unit(p);
  theta = detail::admissible_theta(f, theta);
  p = clamp_unit(p);
  v = clamp_unit(v);
  double u = is_survival(f)
                 ? 1.0 - detail::base_h_inverse(base_family(f), 1.0 - p, 1.0 - v, theta)
                 : detail::base_h_inverse(f, p, v, theta);
  return clamp_unit(u);
}

// ---------------------------------------------------------------------------
// Fast log-density evaluation over a fixed data pair: per-observation
// transforms are computed once, the parameter varies per call.

class PairKernel {
 public:
  PairKernel(Family f, std::span<const double> u, std::span<const double> v)
      : family_(f), base_(base_family(f)), n_(u.size()) {
    if (u.size() != v.size()) throw std::invalid_argument("PairKernel: length mismatch");
    if (f == Family::Independence) return;
    a_.resize(n_);
    b_.resize(n_);
    if (base_ == Family::Gumbel) {
      la_.resize(n_);
      lb_.resize(n_);
    }
    for (std::size_t t = 0; t < n_; ++t) {
      double uu = clamp_unit(u[t]), vv = clamp_unit(v[t]);
      if (is_survival(f)) {
        uu = 1.0 - uu;
        vv = 1.0 - vv;
      }
      switch (base_) {
        case Family::Gaussian:
          a_[t] = norm_quantile(uu);
          b_[t] = norm_quantile(vv);
          break;
        case Family::Clayton:
          a_[t] = std::log(uu);
          b_[t] = std::log(vv);
          break;
        case Family::Gumbel:
          a_[t] = -std::log(uu);
          b_[t] = -std::log(vv);
          la_[t] = std::log(a_[t]);
          lb_[t] = std::log(b_[t]);
          break;
        default: break;
      }
    }
  }

  Family family() const noexcept { return family_; }
  std::size_t size() const noexcept { return n_; }

  // log c(u_t, v_t; theta); theta must already be admissible.
  double log_density(std::size_t t, double theta) const {
    switch (base_) {
      case Family::Gaussian: return detail::gaussian_log_density(a_[t], b_[t], theta);
      case Family::Clayton: return detail::clayton_log_density(a_[t], b_[t], theta);
      case Family::Gumbel:
        return detail::gumbel_log_density(a_[t], b_[t], la_[t], lb_[t], theta);
      default: return 0.0;
    }
  }

  double log_density_latent(std::size_t t, double lambda) const {
    if (family_ == Family::Independence) return 0.0;
    if (std::isnan(lambda)) return lambda;
    return log_density(t, theta_from_latent(family_, lambda));
  }

  double total_log_density(double theta) const {
    if (family_ == Family::Independence) return 0.0;
    theta = detail::admissible_theta(family_, theta);
    double s = 0.0;
    for (std::size_t t = 0; t < n_; ++t) s += log_density(t, theta);
    return s;
  }

 private:
  Family family_;
  Family base_;
  std::size_t n_;
  std::vector<double> a_, b_, la_, lb_;
};

}  // namespace dvscar
