#pragma once

// Efficient importance sampling (EIS) for the bivariate SCAR likelihood
//
//   L(omega) = int prod_t c(u_t, v_t; theta(lambda_t)) p(lambda_t | lambda_{t-1}) dLambda.
//
// The sampler for period t is the AR(1) transition tilted by
// zeta_t(lambda) = exp(a1_t lambda + a2_t lambda^2), which stays Gaussian.
// Its normalizing constant chi_t(lambda_{t-1}) is moved back one period, so
// each period's auxiliary parameters come from an OLS fit of
//   log c_t(lambda_t) + log chi_{t+1}(lambda_t)  on  [1, lambda_t, lambda_t^2]
// run backwards from t = T (where chi_{T+1} = 1).
//
// lambda_1 follows the stationary law N(mu, avar), so the first period is
// tilted the same way and contributes the constant log chi_1 to every weight.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvscar/copula.hpp"
#include "dvscar/errors.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/random.hpp"

namespace dvscar {

struct EisConfig {
  std::size_t n_traj = 100;
  int max_fixed_point_iters = 10;
  double fp_tolerance = 1e-3;
  std::uint64_t seed = 0;
};

struct AuxSchedule {
  std::vector<double> a1;
  std::vector<double> a2;
  std::vector<double> intercept;

  static AuxSchedule zeros(std::size_t T) {
    return {std::vector<double>(T, 0.0), std::vector<double>(T, 0.0),
            std::vector<double>(T, 0.0)};
  }
  std::size_t size() const noexcept { return a1.size(); }
};

// N latent trajectories (row-major N x T) with their log importance weights.
struct TrajectorySet {
  std::size_t n = 0;
  std::size_t T = 0;
  std::vector<double> paths;
  std::vector<double> log_weights;

  double at(std::size_t i, std::size_t t) const { return paths[i * T + t]; }
  std::span<const double> path(std::size_t i) const { return {paths.data() + i * T, T}; }
};

struct SamplerMoments {
  double mean = 0.0;
  double variance = 1.0;
};

// Gaussian N(prior_mean, prior_var) tilted by exp(a1 x + a2 x^2).
inline SamplerMoments tilt_gaussian(double prior_mean, double prior_var, double a1, double a2) {
  double precision = 1.0 / prior_var - 2.0 * a2;
  if (!(precision > 0.0)) throw DomainError("EIS sampler precision is not positive");
  double v = 1.0 / precision;
  return {v * (prior_mean / prior_var + a1), v};
}

// log of int N(x; prior_mean, prior_var) exp(a1 x + a2 x^2) dx, written so
// that nothing cancels when prior_var is tiny.
inline double tilt_log_normalizer(double prior_mean, double prior_var, double a1, double a2) {
  double precision = 1.0 - 2.0 * a2 * prior_var;  // relative to 1 / prior_var
  if (!(precision > 0.0)) throw DomainError("EIS sampler precision is not positive");
  double r = 1.0 / precision;
  return r * (a1 * prior_mean + a2 * prior_mean * prior_mean + 0.5 * a1 * a1 * prior_var) +
         0.5 * std::log(r);
}

// Moments of the importance sampler for lambda_t given lambda_{t-1}.
inline SamplerMoments sampler_moments(const ScarParams& p, double lambda_prev, double a1,
                                      double a2) {
  return tilt_gaussian(p.mu + p.phi * (lambda_prev - p.mu), p.sigma * p.sigma, a1, a2);
}

// log chi(lambda_prev; a1, a2), the normalizing constant of the sampler kernel.
inline double chi_log(const ScarParams& p, double lambda_prev, double a1, double a2) {
  return tilt_log_normalizer(p.mu + p.phi * (lambda_prev - p.mu), p.sigma * p.sigma, a1, a2);
}

struct QuadraticFit {
  double intercept = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  bool full_rank = true;
};

// Least squares of y on [1, x, x^2] through a modified Gram-Schmidt QR on the
// centered and scaled regressor. Optional non-negative weights turn it into
// weighted least squares. Degenerate designs fall back to a constant fit.
inline QuadraticFit regress_quadratic(std::span<const double> x, std::span<const double> y,
                                      std::span<const double> weights = {}) {
  const std::size_t n = x.size();
  if (n != y.size() || n == 0 || (!weights.empty() && weights.size() != n)) {
    throw std::invalid_argument("regress_quadratic: bad sizes");
  }
  auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double sw = 0.0, mean = 0.0, ymean = 0.0;
  std::size_t support = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt(i);
    mean += wt(i) * x[i];
    ymean += wt(i) * y[i];
    support += wt(i) > 0.0;
  }
  if (!(sw > 0.0)) throw std::invalid_argument("regress_quadratic: weights sum to zero");
  mean /= sw;
  ymean /= sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += wt(i) * (x[i] - mean) * (x[i] - mean);
  double scale = std::sqrt(ss / sw);
  auto fallback = [&] { return QuadraticFit{ymean, 0.0, 0.0, false}; };
  if (support < 3 || !(scale > 1e-10 * (1.0 + std::abs(mean)))) return fallback();

  // Columns of the row-weighted design, sqrt(w) * [1, z, z^2].
  std::vector<double> q0(n), q1(n), q2(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = std::sqrt(wt(i)), z = (x[i] - mean) / scale;
    q0[i] = r;
    q1[i] = r * z;
    q2[i] = r * z * z;
  }
  auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  };
  const double r00 = std::sqrt(dot(q0, q0));
  for (double& v : q0) v /= r00;
  // Column 1: the weighted centering already makes it orthogonal to column 0.
  const double r11 = std::sqrt(dot(q1, q1));
  for (double& v : q1) v /= r11;
  const double r02 = dot(q0, q2);
  for (std::size_t i = 0; i < n; ++i) q2[i] -= r02 * q0[i];
  const double r12 = dot(q1, q2);
  for (std::size_t i = 0; i < n; ++i) q2[i] -= r12 * q1[i];
  const double r22 = std::sqrt(dot(q2, q2));
  if (r22 < 1e-8 * r00) return fallback();
  for (double& v : q2) v /= r22;

  double z0 = 0.0, z1 = 0.0, z2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double ry = std::sqrt(wt(i)) * y[i];
    z0 += q0[i] * ry;
    z1 += q1[i] * ry;
    z2 += q2[i] * ry;
  }
  double b2 = z2 / r22;
  double b1 = (z1 - r12 * b2) / r11;
  double b0 = (z0 - r02 * b2) / r00;
  // Undo z = (x - mean) / scale.
  QuadraticFit fit;
  fit.a2 = b2 / (scale * scale);
  fit.a1 = b1 / scale - 2.0 * b2 * mean / (scale * scale);
  fit.intercept = b0 - b1 * mean / scale + b2 * mean * mean / (scale * scale);
  return fit;
}

// Least squares of y on [1, x]; used when the quadratic fit is convex, so the
// slope is re-estimated with the curvature held at zero.
inline QuadraticFit regress_linear(std::span<const double> x, std::span<const double> y,
                                   std::span<const double> weights = {}) {
  const std::size_t n = x.size();
  if (n != y.size() || n == 0 || (!weights.empty() && weights.size() != n)) {
    throw std::invalid_argument("regress_linear: bad sizes");
  }
  auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double sw = 0.0, xm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt(i);
    xm += wt(i) * x[i];
    ym += wt(i) * y[i];
  }
  if (!(sw > 0.0)) throw std::invalid_argument("regress_linear: weights sum to zero");
  xm /= sw;
  ym /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += wt(i) * (x[i] - xm) * (x[i] - xm);
    sxy += wt(i) * (x[i] - xm) * (y[i] - ym);
  }
  if (n < 2 || !(sxx > 1e-20 * sw * (1.0 + xm * xm))) return {ym, 0.0, 0.0, false};
  double b = sxy / sxx;
  return {ym - b * xm, b, 0.0, true};
}

namespace detail {

inline double prior_variance(const ScarParams& p, std::size_t t) {
  return t == 0 ? p.stationary_variance() : p.sigma * p.sigma;
}

// Precomputed pieces of log chi_{t+1}(lambda_t) as a function of lambda_t.
struct ChiNext {
  double r = 1.0;         // sampler variance of period t+1 over sigma^2
  double a1 = 0.0;
  double a2 = 0.0;
  double quad = 0.0;      // 0.5 a1^2 sigma^2
  double half_log_r = 0.0;
  bool active = false;

  double operator()(const ScarParams& p, double lambda) const {
    if (!active) return 0.0;
    double pm = p.mu + p.phi * (lambda - p.mu);
    return r * (a1 * pm + a2 * pm * pm + quad) + half_log_r;
  }
};

inline ChiNext chi_next(const ScarParams& p, const AuxSchedule& aux, std::size_t t) {
  ChiNext c;
  if (t + 1 >= aux.size()) return c;
  double s2 = p.sigma * p.sigma;
  c.a1 = aux.a1[t + 1];
  c.a2 = aux.a2[t + 1];
  c.r = 1.0 / (1.0 - 2.0 * c.a2 * s2);
  c.quad = 0.5 * c.a1 * c.a1 * s2;
  c.half_log_r = 0.5 * std::log(c.r);
  c.active = true;
  return c;
}

inline void check_aux(const ScarParams& p, const AuxSchedule& aux) {
  for (std::size_t t = 0; t < aux.size(); ++t) {
    if (!(1.0 / prior_variance(p, t) - 2.0 * aux.a2[t] > 0.0)) {
      throw DomainError("AuxSchedule: nonpositive sampler precision at t=" + std::to_string(t));
    }
  }
}

// Draws trajectories from the importance sampler using fixed base noise.
inline std::vector<double> draw_paths(const ScarParams& p, const AuxSchedule& aux,
                                      const NormalMatrix& noise) {
  const std::size_t n = noise.rows, T = noise.cols;
  std::vector<double> paths(n * T);
  const double s2 = p.sigma * p.sigma;
  std::vector<double> var(T), sd(T);
  for (std::size_t t = 0; t < T; ++t) {
    var[t] = 1.0 / (1.0 / prior_variance(p, t) - 2.0 * aux.a2[t]);
    sd[t] = std::sqrt(var[t]);
  }
  const double avar = p.stationary_variance();
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = noise.row(i);
    double* lam = paths.data() + i * T;
    lam[0] = var[0] * (p.mu / avar + aux.a1[0]) + sd[0] * z[0];
    for (std::size_t t = 1; t < T; ++t) {
      double pm = p.mu + p.phi * (lam[t - 1] - p.mu);
      lam[t] = var[t] * (pm / s2 + aux.a1[t]) + sd[t] * z[t];
    }
  }
  return paths;
}

inline std::vector<double> log_densities(const PairKernel& kernel,
                                         const std::vector<double>& paths, std::size_t n,
                                         std::size_t T) {
  std::vector<double> out(n * T);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < T; ++t) {
      out[i * T + t] = kernel.log_density_latent(t, paths[i * T + t]);
    }
  }
  return out;
}

inline std::vector<double> log_weights(const ScarParams& p, const AuxSchedule& aux,
                                       const std::vector<double>& paths,
                                       const std::vector<double>& logdens, std::size_t n,
                                       std::size_t T) {
  double log_chi0 = tilt_log_normalizer(p.mu, p.stationary_variance(), aux.a1[0], aux.a2[0]);
  std::vector<ChiNext> chi(T);
  for (std::size_t t = 0; t < T; ++t) chi[t] = chi_next(p, aux, t);
  std::vector<double> w(n, log_chi0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double lam = paths[i * T + t];
      s += logdens[i * T + t] + chi[t](p, lam) - aux.a1[t] * lam - aux.a2[t] * lam * lam;
    }
    w[i] += s;
  }
  return w;
}

// Sample variance; NaN or infinite entries give +inf.
inline double sample_variance(std::span<const double> w) {
  double m = 0.0;
  for (double x : w) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    m += x;
  }
  m /= static_cast<double>(w.size());
  double s = 0.0;
  for (double x : w) s += (x - m) * (x - m);
  return w.size() > 1 ? s / static_cast<double>(w.size() - 1) : 0.0;
}

inline double log_mean_exp(std::span<const double> w) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : w) {
    if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
    m = std::max(m, x);
  }
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : w) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(w.size()));
}

inline double effective_sample_size(std::span<const double> w) {
  double a = 0.0, b = 0.0;
  for (double x : w) {
    a += x;
    b += x * x;
  }
  return b > 0.0 ? a * a / b : 0.0;
}

// Regression weights exp(g * (logw - max)) with g = 1 when that keeps an
// effective sample size of at least `min_fraction` of the draws, otherwise
// the largest g that does. Long series have nearly degenerate raw weights,
// and tempering keeps the regression from resting on a handful of draws.
inline std::vector<double> tempered_weights(std::span<const double> logw, double min_fraction) {
  const std::size_t n = logw.size();
  double top = -std::numeric_limits<double>::infinity();
  for (double x : logw) top = std::max(top, x);
  std::vector<double> w(n, 1.0);
  if (!std::isfinite(top)) return w;
  auto fill = [&](double g) {
    for (std::size_t i = 0; i < n; ++i) w[i] = std::isfinite(logw[i]) ? std::exp(g * (logw[i] - top)) : 0.0;
    return effective_sample_size(w);
  };
  const double target = min_fraction * static_cast<double>(n);
  if (fill(1.0) >= target) return w;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    double mid = 0.5 * (lo + hi);
    (fill(mid) >= target ? lo : hi) = mid;
  }
  fill(lo);
  return w;
}

}  // namespace detail

// Regression targets more than this far below the period's best draw are
// raised to that floor. Such draws carry no weight, and without the floor the
// quadratic chases the steep tail of log c instead of the region that matters.
inline constexpr double kRegressionFloor = 20.0;

// Smallest effective sample size, as a fraction of the draws, that the
// regression weights may have.
inline constexpr double kMinRegressionEss = 1.0 / 3.0;

// Backward pass: for t = T..1 regress log c_t + log chi_{t+1} on [1, lambda, lambda^2].
// `paths` and `log_dens` are row-major N x T. `weights`, when given, are the
// per-draw regression weights (empty means ordinary least squares).
inline AuxSchedule backward_regression(const ScarParams& p, std::span<const double> paths,
                                       std::span<const double> log_dens, std::size_t n,
                                       std::size_t T, std::span<const double> weights = {}) {
  if (paths.size() != n * T || log_dens.size() != n * T || (!weights.empty() && weights.size() != n)) {
    throw std::invalid_argument("backward_regression: size mismatch");
  }
  AuxSchedule aux = AuxSchedule::zeros(T);
  std::vector<double> x(n), y(n);
  for (std::size_t tt = T; tt-- > 0;) {
    detail::ChiNext chi = detail::chi_next(p, aux, tt);
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = paths[i * T + tt];
      y[i] = log_dens[i * T + tt] + chi(p, x[i]);
      finite = finite && std::isfinite(y[i]) && std::isfinite(x[i]);
    }
    if (!finite) continue;
    double top = *std::max_element(y.begin(), y.end());
    for (double& yi : y) yi = std::max(yi, top - kRegressionFloor);
    QuadraticFit fit = regress_quadratic(x, y, weights);
    if (fit.a2 > 0.0) fit = regress_linear(x, y, weights);
    aux.intercept[tt] = fit.intercept;
    aux.a1[tt] = fit.a1;
    aux.a2[tt] = fit.a2;
  }
  return aux;
}

// Log-likelihood estimate for a given sampler; `traj` receives the draws and
// their log weights when non-null.
inline double simulated_loglik(const ScarParams& p, const PairKernel& kernel,
                               const AuxSchedule& aux, const NormalMatrix& noise,
                               TrajectorySet* traj = nullptr) {
  p.validate();
  const std::size_t n = noise.rows, T = noise.cols;
  if (kernel.size() != T || aux.size() != T) {
    throw std::invalid_argument("simulated_loglik: length mismatch");
  }
  detail::check_aux(p, aux);
  std::vector<double> paths = detail::draw_paths(p, aux, noise);
  std::vector<double> ld = detail::log_densities(kernel, paths, n, T);
  std::vector<double> w = detail::log_weights(p, aux, paths, ld, n, T);
  double ll = detail::log_mean_exp(w);
  if (traj) *traj = TrajectorySet{n, T, std::move(paths), std::move(w)};
  return ll;
}

inline double simulated_loglik(const ScarParams& p, std::span<const double> u,
                               std::span<const double> v, Family family, const AuxSchedule& aux,
                               const NormalMatrix& noise) {
  return simulated_loglik(p, PairKernel(family, u, v), aux, noise);
}

// A refit that increases the spread of the log weights is pulled back
// towards the current schedule by halving the step, at most this many times
// (once when starting from a supplied schedule, which is already close).
inline constexpr int kMaxDampingSteps = 8;

struct EisResult {
  AuxSchedule aux;
  TrajectorySet trajectories;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Fixed point between drawing from the sampler and re-fitting its auxiliary
// parameters, always with the same base noise. Each refit is a least squares
// fit weighted by the tempered importance weights of the current draws. Starts from the natural
// sampler a = 0 unless a starting schedule is given. The variance of the log
// weights never increases: a refit that would raise it is pulled back towards
// the current schedule by halving the step, and if that never helps the
// iteration stops where it is.
inline EisResult eis_fixed_point(const ScarParams& p, const PairKernel& kernel,
                                 const NormalMatrix& noise, const EisConfig& cfg,
                                 const AuxSchedule* start = nullptr) {
  p.validate();
  const std::size_t n = noise.rows, T = noise.cols;
  if (n < 2) throw std::invalid_argument("eis_fixed_point: need at least 2 trajectories");
  if (T == 0 || kernel.size() != T) throw std::invalid_argument("eis_fixed_point: bad length");

  struct State {
    AuxSchedule aux;
    std::vector<double> paths, ld, w;
    double ll = 0.0;
    double spread = 0.0;
  };
  auto evaluate = [&](AuxSchedule aux) {
    State s{std::move(aux), {}, {}, {}, 0.0, 0.0};
    s.paths = detail::draw_paths(p, s.aux, noise);
    s.ld = detail::log_densities(kernel, s.paths, n, T);
    s.w = detail::log_weights(p, s.aux, s.paths, s.ld, n, T);
    s.ll = detail::log_mean_exp(s.w);
    s.spread = detail::sample_variance(s.w);
    return s;
  };
  auto blend = [&](const AuxSchedule& from, const AuxSchedule& to, double step) {
    AuxSchedule out = to;
    for (std::size_t t = 0; t < T; ++t) {
      out.a1[t] = from.a1[t] + step * (to.a1[t] - from.a1[t]);
      out.a2[t] = from.a2[t] + step * (to.a2[t] - from.a2[t]);
      out.intercept[t] = from.intercept[t] + step * (to.intercept[t] - from.intercept[t]);
    }
    return out;
  };

  EisResult res;
  if (start && start->size() != T) throw std::invalid_argument("eis_fixed_point: bad start");
  State cur = evaluate(start ? *start : AuxSchedule::zeros(T));
  const int max_damping = start ? 1 : kMaxDampingSteps;
  for (int it = 1; it <= cfg.max_fixed_point_iters; ++it) {
    std::vector<double> rw = detail::tempered_weights(cur.w, kMinRegressionEss);
    AuxSchedule target = backward_regression(p, cur.paths, cur.ld, n, T, rw);
    State next = evaluate(target);
    double step = 1.0;
    for (int k = 0; k < max_damping && !(next.spread <= cur.spread); ++k) {
      step *= 0.5;
      next = evaluate(blend(cur.aux, target, step));
    }
    res.iterations = it;
    if (!(next.spread <= cur.spread)) break;
    double change = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double d = std::abs(next.aux.a1[t] - cur.aux.a1[t]) + std::abs(next.aux.a2[t] - cur.aux.a2[t]);
      double s = 1.0 + std::abs(cur.aux.a1[t]) + std::abs(cur.aux.a2[t]);
      change = std::max(change, d / s);
    }
    cur = std::move(next);
    if (step == 1.0 && change < cfg.fp_tolerance) {
      res.converged = true;
      break;
    }
  }
  res.aux = std::move(cur.aux);
  res.loglik = cur.ll;
  res.trajectories = TrajectorySet{n, T, std::move(cur.paths), std::move(cur.w)};
  return res;
}

inline EisResult eis_fixed_point(const ScarParams& p, std::span<const double> u,
                                 std::span<const double> v, Family family, const EisConfig& cfg) {
  NormalMatrix noise = normal_matrix(cfg.n_traj, u.size(), cfg.seed);
  return eis_fixed_point(p, PairKernel(family, u, v), noise, cfg);
}

struct SmoothedTau {
  std::vector<double> tau;
  double ess = 0.0;
  bool low_ess = false;  // effective sample size below 2
};

// Importance-weighted posterior mean of psi(lambda_t) for every t.
inline SmoothedTau smoothed_tau(const TrajectorySet& traj) {
  SmoothedTau out;
  out.tau.assign(traj.T, 0.0);
  if (traj.n == 0) return out;
  double m = *std::max_element(traj.log_weights.begin(), traj.log_weights.end());
  if (!std::isfinite(m)) throw DomainError("smoothed_tau: non-finite log weights");
  std::vector<double> w(traj.n);
  double sw = 0.0, sw2 = 0.0;
  for (std::size_t i = 0; i < traj.n; ++i) {
    w[i] = std::exp(traj.log_weights[i] - m);
    sw += w[i];
    sw2 += w[i] * w[i];
  }
  for (std::size_t i = 0; i < traj.n; ++i) {
    double wi = w[i] / sw;
    for (std::size_t t = 0; t < traj.T; ++t) out.tau[t] += wi * fisher_inv(traj.at(i, t));
  }
  out.ess = sw * sw / sw2;
  out.low_ess = out.ess < 2.0;
  return out;
}

}  // namespace dvscar
