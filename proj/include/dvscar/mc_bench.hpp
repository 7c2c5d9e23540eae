#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dvscar/copula.hpp"
#include "dvscar/data_io.hpp"
#include "dvscar/dvine.hpp"
#include "dvscar/edge_fit.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/parallel.hpp"

namespace dvscar {

struct Scenario {
  std::string name;
  DvineSpec truth;
  std::size_t T = 1000;
  std::size_t R = 50;
};

namespace detail {

inline std::vector<std::string> numbered_labels(std::size_t d) {
  std::vector<std::string> l;
  for (std::size_t k = 1; k <= d; ++k) l.push_back(std::to_string(k));
  return l;
}

// Static edge whose latent level is fixed at mu, i.e. tau = tanh(mu).
inline EdgeModel static_at_level(Family f, double mu) {
  return EdgeModel::make_static(f, tau_to_theta(f, fisher_inv(mu)));
}

inline Scenario common_tv(const std::string& name, std::size_t d, Family f, double sigma) {
  Scenario s{name, DvineSpec::independence(numbered_labels(d))};
  for (auto& tree : s.truth.trees)
    for (auto& e : tree) e = EdgeModel::make_tv(f, {0.5, 0.95, sigma});
  return s;
}

inline Scenario first_tree_tv(const std::string& name, Family f, double sigma) {
  Scenario s{name, DvineSpec::independence(numbered_labels(4))};
  for (auto& e : s.truth.trees[0]) e = EdgeModel::make_tv(f, {0.5, 0.95, sigma});
  s.truth.edge({2, 1}) = static_at_level(Family::Gaussian, 0.5);
  s.truth.edge({2, 2}) = static_at_level(Family::Gaussian, 0.3);
  s.truth.edge({3, 1}) = static_at_level(Family::Gaussian, 0.2);
  s.truth.max_tv_tree = 1;
  return s;
}

inline Scenario three_dim(const std::string& name, std::array<Family, 3> fam) {
  Scenario s{name, DvineSpec::independence(numbered_labels(3))};
  s.truth.edge({1, 1}) = EdgeModel::make_tv(fam[0], {0.5, 0.85, 0.15});
  s.truth.edge({1, 2}) = EdgeModel::make_tv(fam[1], {0.5, 0.95, 0.15});
  s.truth.edge({2, 1}) = EdgeModel::make_tv(fam[2], {0.5, 0.85, 0.15});
  return s;
}

}  // namespace detail

inline std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const char* t : {"table1", "table2"})
    for (const char* f : {"gauss", "clayton", "gumbel"})
      for (const char* s : {"15", "05"}) names.push_back(std::string(t) + "-" + f + "-" + s);
  for (const char* f : {"gauss", "clayton", "gumbel", "mixed"}) names.push_back(std::string("table3-") + f);
  names.push_back("independence");
  return names;
}

inline std::optional<Scenario> builtin_scenario(const std::string& name) {
  using detail::common_tv;
  const std::array<std::pair<const char*, Family>, 3> fams{
      {{"gauss", Family::Gaussian}, {"clayton", Family::Clayton}, {"gumbel", Family::Gumbel}}};
  for (const auto& [code, fam] : fams) {
    for (const auto& [tag, sigma] : {std::pair{"15", 0.15}, std::pair{"05", 0.05}}) {
      std::string suffix = std::string(code) + "-" + tag;
      if (name == "table1-" + suffix) return common_tv(name, 4, fam, sigma);
      if (name == "table2-" + suffix) return detail::first_tree_tv(name, fam, sigma);
    }
    if (name == std::string("table3-") + code) return detail::three_dim(name, {fam, fam, fam});
  }
  if (name == "table2-gauss-mixed") return detail::first_tree_tv(name, Family::Gaussian, 0.15);
  if (name == "table3-mixed")
    return detail::three_dim(name, {Family::Clayton, Family::Gumbel, Family::Gaussian});
  if (name == "independence") return Scenario{name, DvineSpec::independence(detail::numbered_labels(4))};
  return std::nullopt;
}

// A vine spec document with optional top-level "T" and "R".
inline Scenario load_scenario(const std::string& path) {
  json doc = detail::parse_json_text(read_text_file(path), path);
  Scenario s{path, spec_from_json(doc)};
  if (doc.contains("name")) s.name = detail::require<std::string>(doc, "name", path);
  if (doc.contains("T")) s.T = detail::require<std::size_t>(doc, "T", path);
  if (doc.contains("R")) s.R = detail::require<std::size_t>(doc, "R", path);
  return s;
}

// Mean and standard error of relative bias and relative squared error.
struct RelativeStats {
  double bias = 0.0;
  double bias_se = 0.0;
  double mse = 0.0;
  double mse_se = 0.0;
};

// x holds (estimate - truth) / truth for each successful replication. The MSE
// is assembled as bias^2 plus the centred second moment, so mse >= bias^2
// holds in floating point as well.
inline RelativeStats relative_stats(const std::vector<double>& x) {
  RelativeStats s;
  const double n = static_cast<double>(x.size());
  if (x.empty()) return s;
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double central = 0.0;
  for (double v : x) central += (v - m) * (v - m);
  s.bias = m;
  s.mse = m * m + central / n;
  if (x.size() > 1) {
    s.bias_se = std::sqrt(central / (n - 1.0) / n);
    double c2 = 0.0;
    for (double v : x) c2 += (v * v - s.mse) * (v * v - s.mse);
    s.mse_se = std::sqrt(c2 / (n - 1.0) / n);
  }
  return s;
}

struct McEdgeRow {
  EdgeId id;
  std::string index;  // e.g. "13|2"
  Family family = Family::Independence;
  EdgeMode mode = EdgeMode::Independence;
  std::array<double, 3> truth{};  // mu, phi, sigma; static edges carry only mu
  std::array<std::optional<RelativeStats>, 3> stats;
  double sn = 0.0;
  double avar = 0.0;
  double mean_loglik = 0.0;
};

struct McReport {
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t T = 0;
  std::size_t R = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;  // one per failed replication, in order
  std::vector<McEdgeRow> rows;

  bool failure_rate_ok() const { return 20 * failures < R; }
  const McEdgeRow& row(EdgeId id) const {
    for (const auto& r : rows)
      if (r.id.tree == id.tree && r.id.position == id.position) return r;
    throw std::out_of_range("McReport: no such edge");
  }
};

struct McOptions {
  EisConfig eis;  // n_traj and fixed-point settings; the seed is set per replication
  ScarFitOptions scar;
  std::size_t workers = 1;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline std::string edge_index(EdgeId e) {
  std::string s = std::to_string(e.position) + std::to_string(e.position + e.tree);
  if (e.tree > 1) {
    s += "|";
    for (int k = e.position + 1; k < e.position + e.tree; ++k) s += std::to_string(k);
  }
  return s;
}

namespace detail {

// Latent-scale parameters compared against the truth: (mu, phi, sigma) for
// time-varying edges and mu = atanh(tau) for static ones.
inline std::array<double, 3> latent_view(const EdgeModel& m) {
  if (m.mode == EdgeMode::TimeVarying) return {m.scar->mu, m.scar->phi, m.scar->sigma};
  if (m.mode == EdgeMode::Static) return {fisher(m.static_tau()), 0.0, 0.0};
  return {0.0, 0.0, 0.0};
}

}  // namespace detail

// Simulates R data sets from the truth (replication r uses seed + r), fits each
// with the true families and modes held fixed, and summarizes relative errors.
inline McReport run_scenario(const Scenario& s, std::uint64_t seed, const McOptions& opt = {}) {
  if (s.R < 10) throw std::invalid_argument("run_scenario: need at least 10 replications");
  s.truth.validate();
  const std::size_t d = s.truth.d();

  struct Replication {
    std::optional<DvineSpec> fit;
    std::string error;
  };
  std::vector<Replication> reps(s.R);
  std::mutex progress_mutex;
  std::size_t done = 0;

  parallel_for(s.R, opt.workers, [&](std::size_t k) {
    const std::uint64_t rep_seed = seed + k + 1;
    try {
      DvineSimulation sim = simulate_dvine(s.truth, s.T, rep_seed);
      DvineFitOptions fo;
      fo.eis = opt.eis;
      fo.eis.seed = derive_seed(rep_seed, {2});
      fo.scar = opt.scar;
      fo.fixed = &s.truth;
      fo.max_tv_tree = s.truth.max_tv_tree;
      fo.trunc_tree = s.truth.trunc_tree;
      reps[k].fit = fit_dvine(sim.panel, fo).spec;
    } catch (const std::exception& e) {
      reps[k].error = "replication " + std::to_string(k + 1) + ": " + e.what();
    }
    if (opt.progress) {
      std::lock_guard lock(progress_mutex);
      opt.progress(++done, s.R);
    }
  });

  McReport rep;
  rep.scenario = s.name;
  rep.seed = seed;
  rep.T = s.T;
  rep.R = s.R;
  for (const auto& r : reps)
    if (!r.fit) {
      ++rep.failures;
      rep.failure_messages.push_back(r.error);
    }

  for (std::size_t j = 1; j < d; ++j) {
    for (std::size_t i = 1; i + j <= d; ++i) {
      EdgeId id{static_cast<int>(j), static_cast<int>(i)};
      const EdgeModel& truth = s.truth.edge(id);
      McEdgeRow row;
      row.id = id;
      row.index = edge_index(id);
      row.family = truth.family;
      row.mode = truth.mode;
      row.truth = detail::latent_view(truth);
      if (truth.mode == EdgeMode::TimeVarying) {
        auto st = stationary_stats(*truth.scar);
        row.sn = st.sn;
        row.avar = st.avar;
      } else {
        row.sn = truth.mode == EdgeMode::Static ? std::numeric_limits<double>::infinity() : 0.0;
        row.avar = 0.0;
      }
      const int n_params = truth.mode == EdgeMode::TimeVarying ? 3 : (truth.mode == EdgeMode::Static ? 1 : 0);
      std::array<std::vector<double>, 3> rel;
      double ll = 0.0;
      std::size_t ok = 0;
      for (const auto& r : reps) {
        if (!r.fit) continue;
        const EdgeModel& est = r.fit->edge(id);
        auto v = detail::latent_view(est);
        for (int p = 0; p < n_params; ++p) rel[p].push_back((v[p] - row.truth[p]) / row.truth[p]);
        ll += est.loglik;
        ++ok;
      }
      for (int p = 0; p < n_params; ++p) row.stats[p] = relative_stats(rel[p]);
      row.mean_loglik = ok ? ll / static_cast<double>(ok) : 0.0;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

inline std::string report_csv(const McReport& rep) {
  auto num = [](double x) {
    if (std::isinf(x)) return std::string(x > 0 ? "Inf" : "-Inf");
    return detail::format_double(x);
  };
  std::ostringstream ss;
  ss << "index,family,mode,mu,phi,sigma";
  for (const char* kind : {"rel_bias", "rel_mse"})
    for (const char* p : {"mu", "phi", "sigma"}) ss << ',' << kind << '_' << p << ',' << kind << '_' << p << "_se";
  ss << ",sn,avar,mean_loglik,replications,failures\n";
  for (const auto& r : rep.rows) {
    ss << r.index << ',' << family_code(r.family) << ',' << mode_name(r.mode);
    for (int p = 0; p < 3; ++p) {
      ss << ',';
      if (r.stats[p]) ss << num(r.truth[p]);
    }
    for (int kind = 0; kind < 2; ++kind) {
      for (int p = 0; p < 3; ++p) {
        ss << ',';
        if (r.stats[p]) ss << num(kind ? r.stats[p]->mse : r.stats[p]->bias);
        ss << ',';
        if (r.stats[p]) ss << num(kind ? r.stats[p]->mse_se : r.stats[p]->bias_se);
      }
    }
    if (r.mode == EdgeMode::Independence) ss << ",,";
    else ss << ',' << num(r.sn) << ',' << num(r.avar);
    ss << ',' << num(r.mean_loglik) << ',' << rep.R << ','
       << rep.failures << '\n';
  }
  return ss.str();
}

}  // namespace dvscar
