#pragma once

#include <cstddef>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dvscar/copula.hpp"
#include "dvscar/data_io.hpp"
#include "dvscar/dvine.hpp"
#include "dvscar/kendall.hpp"
#include "dvscar/mc_bench.hpp"
#include "dvscar/panel.hpp"
#include "dvscar/parallel.hpp"

namespace dvscar::cli {

struct RunConfig {
  std::uint64_t seed = 1;
  std::size_t n_traj = 100;
  std::size_t workers = 1;
  std::vector<Family> families{kParametricFamilies.begin(), kParametricFamilies.end()};
  int max_tv_tree = -1;
  int trunc_tree = -1;

  EisConfig eis() const {
    EisConfig c;
    c.n_traj = n_traj;
    c.seed = seed;
    return c;
  }

  void validate() const {
    if (workers < 1) throw std::invalid_argument("--workers must be at least 1");
    if (n_traj < 2) throw std::invalid_argument("--n-traj must be at least 2");
    if (families.empty()) throw std::invalid_argument("--families must name at least one family");
    if (max_tv_tree < -1) throw std::invalid_argument("--max-tv-tree must be -1 or non-negative");
    if (trunc_tree < -1) throw std::invalid_argument("--trunc-tree must be -1 or non-negative");
  }
};

// "N,C,G" -> families, rejecting unknown codes, duplicates and "I".
inline std::vector<Family> parse_families(const std::string& list) {
  std::vector<Family> out;
  std::stringstream ss(list);
  std::string code;
  while (std::getline(ss, code, ',')) {
    auto f = parse_family(detail::trim(code));
    if (!f || *f == Family::Independence)
      throw std::invalid_argument("unknown family code '" + code + "' (expected N, C, G, SC, SG)");
    if (std::find(out.begin(), out.end(), *f) != out.end())
      throw std::invalid_argument("family '" + code + "' listed twice");
    out.push_back(*f);
  }
  return out;
}

inline std::string tau_column(EdgeId id) { return "tau_" + edge_index(id); }

// ---------------------------------------------------------------------------

inline void cmd_pit(const std::string& in_path, const std::string& out_path) {
  save_panel(rank_pit(load_panel(in_path)), out_path);
}

inline DvineSimulation cmd_simulate(const std::string& spec_path, std::size_t T, const RunConfig& cfg,
                                    const std::string& out_path,
                                    const std::optional<std::string>& tau_out = std::nullopt) {
  if (T < 1) throw std::invalid_argument("-T must be at least 1");
  DvineSpec spec = load_spec(spec_path);
  DvineSimulation sim = simulate_dvine(spec, T, cfg.seed);
  save_panel(sim.panel, out_path);
  if (tau_out) {
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    for (std::size_t j = 0; j < sim.tau.size(); ++j)
      for (std::size_t i = 0; i < sim.tau[j].size(); ++i)
        cols.emplace_back(tau_column({static_cast<int>(j + 1), static_cast<int>(i + 1)}), sim.tau[j][i]);
    save_series(cols, *tau_out);
  }
  return sim;
}

struct FitPaths {
  std::string out;
  std::optional<std::string> bic_out;
};

// Orders the variables, fits the vine, and rewrites the outputs after every
// tree so an interrupted run leaves a valid partial document behind.
inline DvineFit cmd_fit(const std::string& data_path, const RunConfig& cfg, const FitPaths& paths,
                        std::ostream* log = nullptr) {
  cfg.validate();
  Panel raw = load_uniform_panel(data_path);
  auto order = order_variables(raw);
  Panel panel = raw.reordered(order);
  DvineFitOptions opt;
  opt.families = cfg.families;
  opt.max_tv_tree = cfg.max_tv_tree;
  opt.trunc_tree = cfg.trunc_tree;
  opt.eis = cfg.eis();
  opt.workers = cfg.workers;
  auto write = [&](const DvineFit& f) {
    save_fit(f, paths.out);
    if (paths.bic_out) save_tree_bic(f, *paths.bic_out);
  };
  DvineFit fit = fit_dvine(panel, opt, [&](const DvineFit& partial) {
    write(partial);
    if (log) {
      *log << "tree " << partial.trees_fitted << ": cumulative BIC "
           << detail::format_double(partial.tree_bic.back()) << '\n';
    }
  });
  write(fit);
  return fit;
}

struct SmoothOptions {
  std::vector<int> edges;  // tree-1 positions, 1-based; empty selects all
  bool implied = false;
  std::size_t mc_reps = 400;
};

namespace detail {

inline Panel align_to_fit(const Panel& data, const DvineSpec& spec) {
  std::vector<std::size_t> order;
  for (const auto& l : spec.labels) {
    auto it = std::find(data.labels.begin(), data.labels.end(), l);
    if (it == data.labels.end()) throw std::invalid_argument("data has no column '" + l + "'");
    order.push_back(static_cast<std::size_t>(it - data.labels.begin()));
  }
  return data.reordered(order);
}

// Per-edge tau series: smoothed for time-varying edges, constant otherwise.
inline std::vector<double> edge_tau_series(const EdgeModel& e, const std::optional<EisResult>& eis,
                                           std::size_t T) {
  if (e.mode == EdgeMode::TimeVarying) {
    auto s = smoothed_tau(eis->trajectories).tau;
    for (double& x : s) x = clamp_tau(e.family, x);
    return s;
  }
  return std::vector<double>(T, e.static_tau());
}

}  // namespace detail

// Smoothed Kendall's tau paths of tree-1 edges and, optionally, the implied
// tau between non-adjacent variables obtained by simulating the vine at each
// date with every pair copula frozen at its smoothed value.
inline std::vector<std::pair<std::string, std::vector<double>>> cmd_smooth(
    const std::string& fit_path, const std::string& data_path, const SmoothOptions& so,
    const RunConfig& cfg, const std::string& out_path, std::ostream* log = nullptr) {
  DvineFit fit = load_fit(fit_path);
  Panel panel = detail::align_to_fit(load_uniform_panel(data_path), fit.spec);
  const int d = static_cast<int>(fit.spec.d());
  std::vector<int> edges = so.edges;
  if (edges.empty())
    for (int i = 1; i < d; ++i) edges.push_back(i);
  for (int i : edges)
    if (i < 1 || i >= d) throw std::invalid_argument("--edge " + std::to_string(i) + " is not a tree-1 edge");
  if (so.implied && so.mc_reps < 2) throw std::invalid_argument("--mc-reps must be at least 2");

  DvineEvaluation ev = evaluate_dvine(panel, fit.spec, fit.eis, cfg.workers, so.implied ? -1 : 1);
  const std::size_t T = panel.T;

  std::vector<std::pair<std::string, std::vector<double>>> cols;
  for (int i : edges) {
    const EdgeModel& e = fit.spec.edge({1, i});
    if (log && e.mode != EdgeMode::TimeVarying) {
      *log << "note: edge " << dvscar::detail::edge_context(fit.spec.labels, {1, i}) << " is "
           << (e.mode == EdgeMode::Static ? "static" : "independence") << ", its tau series is constant\n";
    }
    cols.emplace_back(tau_column({1, i}), detail::edge_tau_series(e, ev.eis[0][i - 1], T));
  }

  if (so.implied && d > 2) {
    std::vector<std::vector<std::vector<double>>> tau(d - 1);
    for (int j = 1; j < d; ++j)
      for (int i = 1; i <= d - j; ++i)
        tau[j - 1].push_back(detail::edge_tau_series(fit.spec.edge({j, i}), ev.eis[j - 1][i - 1], T));
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < d; ++a)
      for (int b = a + 2; b < d; ++b) pairs.emplace_back(a, b);
    std::vector<std::vector<double>> implied(pairs.size(), std::vector<double>(T));
    parallel_for(T, cfg.workers, [&](std::size_t t) {
      DvineSpec frozen = DvineSpec::independence(fit.spec.labels);
      for (int j = 1; j < d; ++j)
        for (int i = 1; i <= d - j; ++i) {
          const EdgeModel& e = fit.spec.edge({j, i});
          if (e.mode == EdgeMode::Independence) continue;
          frozen.edge({j, i}) =
              EdgeModel::make_static(e.family, tau_to_theta(e.family, tau[j - 1][i - 1][t]));
        }
      Panel draws = simulate_dvine(frozen, so.mc_reps, derive_seed(cfg.seed, {3, t})).panel;
      for (std::size_t k = 0; k < pairs.size(); ++k)
        implied[k][t] = empirical_kendall_tau(draws.column(pairs[k].first), draws.column(pairs[k].second));
    });
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      cols.emplace_back("implied_" + fit.spec.labels[pairs[k].first] + "_" + fit.spec.labels[pairs[k].second],
                        std::move(implied[k]));
    }
  }
  save_series(cols, out_path);
  return cols;
}

inline McReport cmd_mc(const std::string& scenario, std::optional<std::size_t> R,
                       std::optional<std::size_t> T, const RunConfig& cfg, const std::string& out_path,
                       std::ostream* log = nullptr) {
  cfg.validate();
  std::optional<Scenario> s = builtin_scenario(scenario);
  if (!s) {
    if (scenario.find('/') == std::string::npos && scenario.find(".json") == std::string::npos) {
      std::string known;
      for (const auto& n : builtin_scenario_names()) known += " " + n;
      throw std::invalid_argument("unknown scenario '" + scenario + "'; built-in scenarios:" + known);
    }
    s = load_scenario(scenario);
  }
  if (R) s->R = *R;
  if (T) s->T = *T;
  McOptions opt;
  opt.eis = cfg.eis();
  opt.workers = cfg.workers;
  if (log) {
    opt.progress = [log](std::size_t done, std::size_t total) {
      *log << "replication " << done << "/" << total << '\n';
    };
  }
  McReport rep = run_scenario(*s, cfg.seed, opt);
  write_text_file(out_path, report_csv(rep));
  return rep;
}

}  // namespace dvscar::cli
