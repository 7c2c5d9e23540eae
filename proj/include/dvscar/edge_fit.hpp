#pragma once

// Fitting a single vine edge: SCAR (time-varying) by simulated maximum
// likelihood, static copula by bounded scalar MLE, and BIC selection among
// independence, static and time-varying candidates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "dvscar/copula.hpp"
#include "dvscar/eis.hpp"
#include "dvscar/kendall.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/optim.hpp"

namespace dvscar {

enum class EdgeMode { TimeVarying, Static, Independence };

inline std::string_view mode_name(EdgeMode m) {
  switch (m) {
    case EdgeMode::TimeVarying: return "tv";
    case EdgeMode::Static: return "static";
    case EdgeMode::Independence: return "indep";
  }
  return "?";
}

inline std::optional<EdgeMode> parse_mode(std::string_view s) {
  for (EdgeMode m : {EdgeMode::TimeVarying, EdgeMode::Static, EdgeMode::Independence})
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

inline int mode_param_count(EdgeMode m) {
  switch (m) {
    case EdgeMode::TimeVarying: return 3;
    case EdgeMode::Static: return 1;
    case EdgeMode::Independence: return 0;
  }
  return 0;
}

inline constexpr std::size_t kMinTvLength = 50;
inline constexpr std::size_t kMinStaticLength = 10;

inline double bic(double loglik, int k, std::size_t T) {
  return -2.0 * loglik + static_cast<double>(k) * std::log(static_cast<double>(T));
}

struct EdgeModel {
  Family family = Family::Independence;
  EdgeMode mode = EdgeMode::Independence;
  std::optional<ScarParams> scar;  // TimeVarying only
  std::optional<double> theta;     // Static only
  double loglik = 0.0;
  int n_params = 0;
  double bic = 0.0;
  bool converged = true;
  bool boundary = false;  // static estimate sits on the tau search bound

  static EdgeModel independence() { return {}; }

  static EdgeModel make_static(Family f, double theta) {
    EdgeModel m;
    m.family = f;
    m.mode = EdgeMode::Static;
    m.theta = theta;
    m.n_params = 1;
    return m;
  }

  static EdgeModel make_tv(Family f, const ScarParams& p) {
    EdgeModel m;
    m.family = f;
    m.mode = EdgeMode::TimeVarying;
    m.scar = p;
    m.n_params = 3;
    return m;
  }

  // Kendall's tau of a static edge (0 for independence).
  double static_tau() const {
    if (mode == EdgeMode::Static && theta) return theta_to_tau(family, *theta);
    return 0.0;
  }

  friend bool operator==(const EdgeModel&, const EdgeModel&) = default;
};

struct CandidateScore {
  Family family = Family::Independence;
  EdgeMode mode = EdgeMode::Independence;
  double bic = 0.0;
  double loglik = 0.0;

  friend bool operator==(const CandidateScore&, const CandidateScore&) = default;
};

// A fitted edge plus, for time-varying edges, the EIS draws at the optimum.
struct EdgeFit {
  EdgeModel model;
  std::optional<EisResult> eis;
  int evaluations = 0;  // likelihood evaluations spent by the optimizer
};

// ---------------------------------------------------------------------------
// Static edge

inline EdgeModel fit_static_edge(std::span<const double> u, std::span<const double> v,
                                 Family family) {
  if (u.size() < kMinStaticLength) {
    throw std::invalid_argument("fit_static_edge: need at least " +
                                std::to_string(kMinStaticLength) + " observations");
  }
  if (family == Family::Independence) {
    EdgeModel m = EdgeModel::independence();
    m.bic = bic(0.0, 0, u.size());
    return m;
  }
  PairKernel kernel(family, u, v);
  double lo = positive_only(family) ? 0.01 : -0.99;
  double hi = 0.99;
  auto negll = [&](double tau) { return -kernel.total_log_density(tau_to_theta(family, tau)); };
  std::uintmax_t max_iter = 200;
  auto [tau_hat, nll] = boost::math::tools::brent_find_minima(negll, lo, hi, 40, max_iter);
  EdgeModel m = EdgeModel::make_static(family, tau_to_theta(family, tau_hat));
  m.loglik = -nll;
  m.bic = bic(m.loglik, 1, u.size());
  m.boundary = tau_hat - lo < 1e-4 || hi - tau_hat < 1e-4;
  m.converged = max_iter < 200;
  return m;
}

// ---------------------------------------------------------------------------
// Time-varying edge

struct ScarFitOptions {
  NelderMeadOptions simplex;
  ScarParams start{0.0, 0.9, 0.1};  // mu is overwritten from the sample tau
  std::vector<double> step{0.2, 0.5, 0.5};
  int restarts = 1;
};

inline double latent_start_mu(Family family, double sample_tau) {
  double tau = positive_only(family) ? std::max(sample_tau, 0.05) : sample_tau;
  return fisher(std::clamp(tau, -0.95, 0.95));
}

// Maximizes the EIS likelihood over (mu, artanh phi, log sigma) with the
// base noise held fixed across all evaluations.
inline EdgeFit fit_scar_edge(const PairKernel& kernel, const NormalMatrix& noise,
                             const EisConfig& cfg, double sample_tau,
                             const ScarFitOptions& opt = {}) {
  const std::size_t T = kernel.size();
  if (T < kMinTvLength) {
    throw std::invalid_argument("fit_scar_edge: need at least " + std::to_string(kMinTvLength) +
                                " observations");
  }
  // Each evaluation starts the fixed point from the schedule of the best point
  // seen so far, which cuts the iterations needed near the optimum.
  std::optional<AuxSchedule> warm;
  double warm_f = std::numeric_limits<double>::infinity();
  auto objective = [&](const std::vector<double>& x) {
    ScarParams p = from_unconstrained({x[0], x[1], x[2]});
    EisResult r = eis_fixed_point(p, kernel, noise, cfg, warm ? &*warm : nullptr);
    double f = std::isfinite(r.loglik) ? -r.loglik : std::numeric_limits<double>::infinity();
    if (f < warm_f) {
      warm_f = f;
      warm = std::move(r.aux);
    }
    return f;
  };
  ScarParams start = opt.start;
  start.mu = latent_start_mu(kernel.family(), sample_tau);
  auto x0 = to_unconstrained(start);
  NelderMeadResult best = nelder_mead(objective, {x0[0], x0[1], x0[2]}, opt.step, opt.simplex);
  for (int r = 0; r < opt.restarts; ++r) {
    NelderMeadResult again = nelder_mead(objective, best.x, opt.step, opt.simplex);
    bool improved = again.f < best.f;
    if (improved || again.converged) {
      int evals = best.evals + again.evals;
      if (improved) best = again;
      best.converged = again.converged;
      best.evals = evals;
    }
  }
  ScarParams p = from_unconstrained({best.x[0], best.x[1], best.x[2]});
  EdgeFit fit;
  fit.eis = eis_fixed_point(p, kernel, noise, cfg);
  fit.model = EdgeModel::make_tv(kernel.family(), p);
  fit.model.loglik = fit.eis->loglik;
  fit.model.bic = bic(fit.model.loglik, 3, T);
  fit.model.converged = best.converged && std::isfinite(fit.model.loglik);
  fit.evaluations = best.evals;
  return fit;
}

inline EdgeFit fit_scar_edge(std::span<const double> u, std::span<const double> v, Family family,
                             const EisConfig& cfg, const ScarFitOptions& opt = {}) {
  if (u.size() < kMinTvLength) {
    throw std::invalid_argument("fit_scar_edge: need at least " + std::to_string(kMinTvLength) +
                                " observations");
  }
  NormalMatrix noise = normal_matrix(cfg.n_traj, u.size(), cfg.seed);
  return fit_scar_edge(PairKernel(family, u, v), noise, cfg, empirical_kendall_tau(u, v), opt);
}

// ---------------------------------------------------------------------------
// Selection

struct EdgeSelection {
  EdgeFit best;
  std::vector<CandidateScore> candidates;
};

inline int family_rank(Family f) {
  if (f == Family::Independence) return -1;
  for (std::size_t k = 0; k < kParametricFamilies.size(); ++k)
    if (kParametricFamilies[k] == f) return static_cast<int>(k);
  return 99;
}

// Candidates: Independence, each family Static, and each family TimeVarying
// when allowed. Minimum BIC wins; ties go to fewer parameters, then family
// order N < C < G < SC < SG. All time-varying candidates share one noise matrix.
inline EdgeSelection select_edge_model(std::span<const double> u, std::span<const double> v,
                                       std::span<const Family> families, bool allow_tv,
                                       const EisConfig& cfg, const ScarFitOptions& opt = {}) {
  const std::size_t T = u.size();
  for (Family f : families) {
    if (f == Family::Independence) throw std::invalid_argument("select_edge_model: bad family");
  }
  std::vector<EdgeFit> fits;
  EdgeFit indep;
  indep.model = EdgeModel::independence();
  indep.model.bic = bic(0.0, 0, T);
  fits.push_back(indep);

  if (T >= kMinStaticLength) {
    for (Family f : families) fits.push_back({fit_static_edge(u, v, f), std::nullopt, 0});
  }
  if (allow_tv && T >= kMinTvLength) {
    NormalMatrix noise = normal_matrix(cfg.n_traj, T, cfg.seed);
    double tau = empirical_kendall_tau(u, v);
    for (Family f : families) fits.push_back(fit_scar_edge(PairKernel(f, u, v), noise, cfg, tau, opt));
  }

  EdgeSelection sel;
  const EdgeFit* best = nullptr;
  auto key = [](const EdgeModel& m) {
    return std::make_tuple(m.bic, m.n_params, family_rank(m.family));
  };
  for (const EdgeFit& f : fits) {
    if (!std::isfinite(f.model.loglik) || !std::isfinite(f.model.bic)) continue;
    sel.candidates.push_back({f.model.family, f.model.mode, f.model.bic, f.model.loglik});
    if (!best || key(f.model) < key(best->model)) best = &f;
  }
  sel.best = *best;
  return sel;
}

}  // namespace dvscar
