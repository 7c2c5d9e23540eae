#pragma once

// D-vine on d variables in a fixed order x_1, ..., x_d. Edge (j, i) of tree j
// couples x_i and x_{i+j} given x_{i+1}, ..., x_{i+j-1}. Its two inputs are
//   left  = F(x_i     | x_{i+1..i+j-1})
//   right = F(x_{i+j} | x_{i+1..i+j-1})
// and the inputs of tree j+1 follow from tree j through h-functions:
//   left_{j+1}(i)  = h(left_j(i)    | right_j(i))
//   right_{j+1}(i) = h(right_j(i+1) | left_j(i+1)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvscar/copula.hpp"
#include "dvscar/edge_fit.hpp"
#include "dvscar/eis.hpp"
#include "dvscar/kendall.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/panel.hpp"
#include "dvscar/parallel.hpp"
#include "dvscar/random.hpp"

namespace dvscar {

// 1-based tree and position.
struct EdgeId {
  int tree = 1;
  int position = 1;

  friend bool operator==(const EdgeId&, const EdgeId&) = default;
};

struct DvineSpec {
  std::vector<std::string> labels;            // variables in vine order
  std::vector<std::vector<EdgeModel>> trees;  // trees[j - 1][i - 1]
  int max_tv_tree = 0;
  int trunc_tree = 0;

  std::size_t d() const noexcept { return labels.size(); }

  const EdgeModel& edge(EdgeId e) const { return trees.at(e.tree - 1).at(e.position - 1); }
  EdgeModel& edge(EdgeId e) { return trees.at(e.tree - 1).at(e.position - 1); }

  // Every edge set to Independence, no restrictions beyond that.
  static DvineSpec independence(std::vector<std::string> labels) {
    DvineSpec s;
    s.labels = std::move(labels);
    const int d = static_cast<int>(s.labels.size());
    for (int j = 1; j < d; ++j) s.trees.emplace_back(d - j, EdgeModel::independence());
    s.max_tv_tree = d - 1;
    s.trunc_tree = d - 1;
    return s;
  }

  void validate() const {
    const int d = static_cast<int>(labels.size());
    if (d < 2) throw std::invalid_argument("vine spec: need at least 2 variables");
    if (static_cast<int>(trees.size()) != d - 1) {
      throw std::invalid_argument("vine spec: expected " + std::to_string(d - 1) + " trees");
    }
    if (max_tv_tree < 0 || max_tv_tree > trunc_tree || trunc_tree > d - 1) {
      throw std::invalid_argument("vine spec: need 0 <= max_tv_tree <= trunc_tree <= d - 1");
    }
    for (int j = 1; j < d; ++j) {
      const auto& tree = trees[j - 1];
      if (static_cast<int>(tree.size()) != d - j) {
        throw std::invalid_argument("vine spec: tree " + std::to_string(j) + " needs " +
                                    std::to_string(d - j) + " edges");
      }
      for (int i = 1; i <= d - j; ++i) {
        const EdgeModel& m = tree[i - 1];
        std::string where = "vine spec: edge " + std::to_string(j) + "," + std::to_string(i);
        if (m.mode == EdgeMode::TimeVarying && j > max_tv_tree)
          throw std::invalid_argument(where + " is time-varying above max_tv_tree");
        if (m.mode != EdgeMode::Independence && j > trunc_tree)
          throw std::invalid_argument(where + " must be independence above trunc_tree");
        if ((m.mode == EdgeMode::Independence) != (m.family == Family::Independence))
          throw std::invalid_argument(where + " mixes independence family and mode");
        if (m.mode == EdgeMode::TimeVarying) {
          if (!m.scar) throw std::invalid_argument(where + " lacks latent parameters");
          m.scar->validate();
        }
        if (m.mode == EdgeMode::Static) {
          if (!m.theta) throw std::invalid_argument(where + " lacks theta");
          check_theta(m.family, *m.theta);
        }
      }
    }
  }

  int parameter_count() const {
    int k = 0;
    for (const auto& tree : trees)
      for (const EdgeModel& m : tree) k += mode_param_count(m.mode);
    return k;
  }

  friend bool operator==(const DvineSpec&, const DvineSpec&) = default;
};

// Conditioned and conditioning labels of an edge.
struct EdgeLabels {
  std::vector<std::string> conditioned;
  std::vector<std::string> conditioning;
};

inline EdgeLabels edge_labels(std::span<const std::string> labels, EdgeId e) {
  const std::size_t i = e.position - 1, j = e.tree;
  EdgeLabels out;
  out.conditioned = {labels[i], labels[i + j]};
  for (std::size_t k = i + 1; k < i + j; ++k) out.conditioning.push_back(labels[k]);
  return out;
}

// Per-edge seed, the same whatever the order or thread the edge runs on.
inline std::uint64_t edge_seed(std::uint64_t global, EdgeId e) {
  return derive_seed(global, {static_cast<std::uint64_t>(e.tree),
                              static_cast<std::uint64_t>(e.position)});
}

// ---------------------------------------------------------------------------
// Ordering

// Greedy path: start from the pair with the largest |tau|, then repeatedly
// attach the unused variable with the largest |tau| to either end of the path.
// Ties go to the smaller column index, then to the front end.
inline std::vector<std::size_t> order_variables(const Panel& panel) {
  const std::size_t d = panel.d();
  if (d < 2) throw std::invalid_argument("order_variables: need at least 2 variables");
  std::vector<double> tau(d * d, 0.0);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b)
      tau[a * d + b] = tau[b * d + a] = std::abs(empirical_kendall_tau(panel.column(a), panel.column(b)));

  std::size_t sa = 0, sb = 1;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a + 1; b < d; ++b)
      if (tau[a * d + b] > tau[sa * d + sb]) sa = a, sb = b;

  std::vector<std::size_t> chain{sa, sb};
  std::vector<bool> used(d, false);
  used[sa] = used[sb] = true;
  while (chain.size() < d) {
    std::size_t best = d;
    bool front = true;
    double best_tau = -1.0;
    for (std::size_t v = 0; v < d; ++v) {
      if (used[v]) continue;
      double tf = tau[v * d + chain.front()], tb = tau[v * d + chain.back()];
      if (tf > best_tau) best_tau = tf, best = v, front = true;
      if (tb > best_tau) best_tau = tb, best = v, front = false;
    }
    used[best] = true;
    if (front) chain.insert(chain.begin(), best);
    else chain.push_back(best);
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Pseudo-observations

enum class Direction { LeftGivenRight, RightGivenLeft };

// h-transform of one edge's inputs. Time-varying edges average h over the
// parameter paths implied by the trajectories (unweighted).
inline std::vector<double> pseudo_observations(std::span<const double> left,
                                               std::span<const double> right,
                                               const EdgeModel& edge,
                                               const TrajectorySet* traj, Direction dir) {
  const std::size_t T = left.size();
  if (right.size() != T) throw std::invalid_argument("pseudo_observations: length mismatch");
  auto a = dir == Direction::LeftGivenRight ? left : right;
  auto b = dir == Direction::LeftGivenRight ? right : left;
  std::vector<double> out(T);
  switch (edge.mode) {
    case EdgeMode::Independence:
      for (std::size_t t = 0; t < T; ++t) out[t] = clamp_unit(a[t]);
      break;
    case EdgeMode::Static:
      for (std::size_t t = 0; t < T; ++t) out[t] = h_func(edge.family, a[t], b[t], *edge.theta);
      break;
    case EdgeMode::TimeVarying: {
      if (!traj || traj->n == 0)
        throw std::invalid_argument("pseudo_observations: time-varying edge needs trajectories");
      if (traj->T != T) throw std::invalid_argument("pseudo_observations: trajectory length");
      for (std::size_t t = 0; t < T; ++t) {
        double s = 0.0;
        for (std::size_t k = 0; k < traj->n; ++k)
          s += h_func(edge.family, a[t], b[t], theta_from_latent(edge.family, traj->at(k, t)));
        out[t] = clamp_unit(s / static_cast<double>(traj->n));
      }
      break;
    }
  }
  return out;
}

namespace detail {

// Inputs of every edge of one tree; left[i], right[i] belong to edge i.
struct TreeInputs {
  std::vector<std::vector<double>> left, right;
};

inline TreeInputs first_tree_inputs(const Panel& panel) {
  TreeInputs in;
  for (std::size_t i = 0; i + 1 < panel.d(); ++i) {
    auto a = panel.column(i), b = panel.column(i + 1);
    in.left.emplace_back(a.begin(), a.end());
    in.right.emplace_back(b.begin(), b.end());
  }
  return in;
}

inline TreeInputs next_tree_inputs(const TreeInputs& in, std::span<const EdgeModel> edges,
                                   std::span<const std::optional<EisResult>> eis) {
  TreeInputs out;
  const std::size_t m = in.left.size();
  auto traj = [&](std::size_t i) { return eis[i] ? &eis[i]->trajectories : nullptr; };
  for (std::size_t i = 0; i + 1 < m; ++i) {
    out.left.push_back(pseudo_observations(in.left[i], in.right[i], edges[i], traj(i),
                                           Direction::LeftGivenRight));
    out.right.push_back(pseudo_observations(in.left[i + 1], in.right[i + 1], edges[i + 1],
                                            traj(i + 1), Direction::RightGivenLeft));
  }
  return out;
}

inline std::string edge_context(std::span<const std::string> labels, EdgeId e) {
  EdgeLabels l = edge_labels(labels, e);
  std::string s = "edge " + std::to_string(e.tree) + "," + std::to_string(e.position) + " (" +
                  l.conditioned[0] + "," + l.conditioned[1];
  if (!l.conditioning.empty()) {
    s += "|";
    for (std::size_t k = 0; k < l.conditioning.size(); ++k)
      s += (k ? "," : "") + l.conditioning[k];
  }
  return s + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sequential estimation

struct DvineFitOptions {
  std::vector<Family> families{kParametricFamilies.begin(), kParametricFamilies.end()};
  int max_tv_tree = -1;  // -1: no restriction
  int trunc_tree = -1;   // -1: no truncation
  EisConfig eis;         // eis.seed is the global seed
  ScarFitOptions scar;
  std::size_t workers = 1;
  // When set, each edge keeps this spec's family and mode and only its
  // parameters are estimated.
  const DvineSpec* fixed = nullptr;
};

struct DvineFit {
  DvineSpec spec;
  std::vector<std::vector<std::vector<CandidateScore>>> candidates;  // per tree, per edge
  std::vector<double> tree_bic;  // BIC of trees 1..k, k = 1..d-1
  double total_bic = 0.0;
  double loglik = 0.0;
  int trees_fitted = 0;
  std::uint64_t seed = 0;
  EisConfig eis;
  std::vector<Family> families;
};

// Called after every completed tree with the partial fit.
using TreeCallback = std::function<void(const DvineFit&)>;

// Fits the vine tree by tree on a panel whose columns are already in vine order.
inline DvineFit fit_dvine(const Panel& panel, const DvineFitOptions& opt,
                          const TreeCallback& on_tree = {}) {
  validate_uniform(panel);
  const int d = static_cast<int>(panel.d());
  if (d < 2) throw std::invalid_argument("fit_dvine: need at least 2 variables");
  const int trunc = opt.trunc_tree < 0 ? d - 1 : opt.trunc_tree;
  const int max_tv = opt.max_tv_tree < 0 ? trunc : std::min(opt.max_tv_tree, trunc);
  if (trunc > d - 1) throw std::invalid_argument("fit_dvine: trunc_tree exceeds d - 1");
  if (opt.max_tv_tree > trunc && opt.trunc_tree >= 0 && opt.max_tv_tree >= 0) {
    throw std::invalid_argument("fit_dvine: max_tv_tree exceeds trunc_tree");
  }
  if (opt.fixed) {
    opt.fixed->validate();
    if (static_cast<int>(opt.fixed->d()) != d)
      throw std::invalid_argument("fit_dvine: fixed spec has a different dimension");
  }

  DvineFit fit;
  fit.spec = DvineSpec::independence(panel.labels);
  fit.spec.max_tv_tree = max_tv;
  fit.spec.trunc_tree = trunc;
  fit.candidates.resize(d - 1);
  fit.seed = opt.eis.seed;
  fit.eis = opt.eis;
  fit.families = opt.families;

  detail::TreeInputs in = detail::first_tree_inputs(panel);
  double cumulative = 0.0;
  for (int j = 1; j < d; ++j) {
    const std::size_t m = d - j;
    std::vector<EdgeFit> fits(m);
    fit.candidates[j - 1].resize(m);
    if (j <= trunc) {
      parallel_for(m, opt.workers, [&](std::size_t i) {
        EdgeId id{j, static_cast<int>(i + 1)};
        EisConfig cfg = opt.eis;
        cfg.seed = edge_seed(opt.eis.seed, id);
        try {
          if (opt.fixed) {
            const EdgeModel& target = opt.fixed->edge(id);
            if (target.mode == EdgeMode::TimeVarying && j > max_tv)
              throw std::invalid_argument("fixed spec is time-varying above max_tv_tree");
            switch (target.mode) {
              case EdgeMode::TimeVarying: {
                NormalMatrix noise = normal_matrix(cfg.n_traj, panel.T, cfg.seed);
                double tau = empirical_kendall_tau(in.left[i], in.right[i]);
                fits[i] = fit_scar_edge(PairKernel(target.family, in.left[i], in.right[i]),
                                        noise, cfg, tau, opt.scar);
                break;
              }
              case EdgeMode::Static:
                fits[i].model = fit_static_edge(in.left[i], in.right[i], target.family);
                break;
              case EdgeMode::Independence:
                fits[i].model = EdgeModel::independence();
                break;
            }
            const EdgeModel& mm = fits[i].model;
            fit.candidates[j - 1][i] = {{mm.family, mm.mode, mm.bic, mm.loglik}};
          } else {
            EdgeSelection sel =
                select_edge_model(in.left[i], in.right[i], opt.families, j <= max_tv, cfg, opt.scar);
            fits[i] = std::move(sel.best);
            fit.candidates[j - 1][i] = std::move(sel.candidates);
          }
        } catch (const std::exception& e) {
          throw std::runtime_error(detail::edge_context(panel.labels, id) + ": " + e.what());
        }
      });
    }
    for (std::size_t i = 0; i < m; ++i) {
      fit.spec.trees[j - 1][i] = fits[i].model;
      cumulative += fits[i].model.bic;
      fit.loglik += fits[i].model.loglik;
    }
    fit.tree_bic.push_back(cumulative);
    fit.trees_fitted = j;
    if (on_tree) on_tree(fit);
    if (j < trunc && j + 1 < d) {
      std::vector<std::optional<EisResult>> eis(m);
      for (std::size_t i = 0; i < m; ++i) eis[i] = std::move(fits[i].eis);
      in = detail::next_tree_inputs(in, fit.spec.trees[j - 1], eis);
    }
  }
  fit.total_bic = cumulative;
  return fit;
}

// ---------------------------------------------------------------------------
// Evaluation at given parameters

struct DvineEvaluation {
  std::vector<std::vector<double>> edge_loglik;                  // per tree, per edge
  std::vector<std::vector<std::optional<EisResult>>> eis;        // time-varying edges only
  std::vector<std::vector<std::vector<double>>> left, right;     // edge inputs
  double loglik = 0.0;
};

// Evaluates every edge on its sequential inputs. Time-varying edges run the
// EIS fixed point at the spec's parameters with the edge's own seed.
// `max_tree` limits the evaluation to trees 1..max_tree (all when negative).
inline DvineEvaluation evaluate_dvine(const Panel& panel, const DvineSpec& spec,
                                      const EisConfig& cfg, std::size_t workers = 1,
                                      int max_tree = -1) {
  spec.validate();
  validate_uniform(panel);
  const int d = static_cast<int>(spec.d());
  if (static_cast<int>(panel.d()) != d) throw std::invalid_argument("evaluate_dvine: dimension");
  const int last = max_tree < 0 ? d - 1 : std::min(max_tree, d - 1);
  DvineEvaluation ev;
  detail::TreeInputs in = detail::first_tree_inputs(panel);
  for (int j = 1; j <= last; ++j) {
    const std::size_t m = d - j;
    std::vector<double> ll(m, 0.0);
    std::vector<std::optional<EisResult>> eis(m);
    parallel_for(m, workers, [&](std::size_t i) {
      EdgeId id{j, static_cast<int>(i + 1)};
      const EdgeModel& e = spec.edge(id);
      try {
        if (e.mode == EdgeMode::Static) {
          ll[i] = PairKernel(e.family, in.left[i], in.right[i]).total_log_density(*e.theta);
        } else if (e.mode == EdgeMode::TimeVarying) {
          EisConfig c = cfg;
          c.seed = edge_seed(cfg.seed, id);
          NormalMatrix noise = normal_matrix(c.n_traj, panel.T, c.seed);
          eis[i] = eis_fixed_point(*e.scar, PairKernel(e.family, in.left[i], in.right[i]), noise, c);
          ll[i] = eis[i]->loglik;
        }
      } catch (const std::exception& ex) {
        throw std::runtime_error(detail::edge_context(spec.labels, id) + ": " + ex.what());
      }
    });
    for (double x : ll) ev.loglik += x;
    ev.edge_loglik.push_back(ll);
    ev.left.push_back(in.left);
    ev.right.push_back(in.right);
    if (j < last) in = detail::next_tree_inputs(in, spec.trees[j - 1], eis);
    ev.eis.push_back(std::move(eis));
  }
  return ev;
}

inline double dvine_loglik(const Panel& panel, const DvineSpec& spec, const EisConfig& cfg,
                           std::size_t workers = 1) {
  return evaluate_dvine(panel, spec, cfg, workers).loglik;
}

// ---------------------------------------------------------------------------
// Simulation

struct DvineSimulation {
  Panel panel;
  std::vector<std::vector<std::vector<double>>> tau;  // per tree, per edge, length T
};

inline DvineSimulation simulate_dvine(const DvineSpec& spec, std::size_t T, std::uint64_t seed) {
  spec.validate();
  const std::size_t d = spec.d();
  DvineSimulation sim;
  sim.panel = Panel(spec.labels, T);

  // theta[j][i][t]
  std::vector<std::vector<std::vector<double>>> theta(d - 1);
  sim.tau.resize(d - 1);
  for (std::size_t j = 1; j < d; ++j) {
    for (std::size_t i = 1; i <= d - j; ++i) {
      EdgeId id{static_cast<int>(j), static_cast<int>(i)};
      const EdgeModel& e = spec.edge(id);
      std::vector<double> th(T, 0.0), tau(T, 0.0);
      if (e.mode == EdgeMode::Static) {
        std::fill(th.begin(), th.end(), *e.theta);
        std::fill(tau.begin(), tau.end(), theta_to_tau(e.family, *e.theta));
      } else if (e.mode == EdgeMode::TimeVarying) {
        auto lam = simulate_path(*e.scar, normal_vector(T, derive_seed(seed, {1, j, i})));
        for (std::size_t t = 0; t < T; ++t) {
          th[t] = theta_from_latent(e.family, lam[t]);
          tau[t] = theta_to_tau(e.family, th[t]);
        }
      }
      theta[j - 1].push_back(std::move(th));
      sim.tau[j - 1].push_back(std::move(tau));
    }
  }

  Rng rng(derive_seed(seed, {0}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // left[j][i], right[j][i] for the current t, j = 1..d-1 (index 0 unused).
  std::vector<std::vector<double>> left(d + 1, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> right(d + 1, std::vector<double>(d, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < d; ++k) {
      double v = clamp_unit(unif(rng));  // F(x_k | x_0..x_{k-1})
      for (std::size_t j = k; j >= 1; --j) {
        std::size_t i = k - j;
        const EdgeModel& e = spec.trees[j - 1][i];
        v = h_inverse(e.family, v, left[j][i], theta[j - 1][i][t]);
        right[j][i] = v;
      }
      sim.panel(t, k) = v;
      left[1][k] = v;
      for (std::size_t j = 1; j <= k && j + 1 < d; ++j) {
        std::size_t i = k - j;
        const EdgeModel& e = spec.trees[j - 1][i];
        left[j + 1][i] = h_func(e.family, left[j][i], right[j][i], theta[j - 1][i][t]);
      }
    }
  }
  return sim;
}

}  // namespace dvscar
