#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dvscar/copula.hpp"
#include "dvscar/dvine.hpp"
#include "dvscar/edge_fit.hpp"
#include "dvscar/eis.hpp"
#include "dvscar/errors.hpp"
#include "dvscar/latent.hpp"
#include "dvscar/panel.hpp"

namespace dvscar {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Probability integral transform

// u = rank / (T + 1) per column, ties receiving their average rank.
inline Panel rank_pit(const Panel& raw) {
  if (raw.T < 2) throw std::invalid_argument("rank_pit: need at least 2 rows");
  Panel out(raw.labels, raw.T);
  std::vector<std::size_t> idx(raw.T);
  for (std::size_t j = 0; j < raw.d(); ++j) {
    auto x = raw.column(j);
    for (double v : x)
      if (!std::isfinite(v)) throw DomainError("rank_pit: non-finite value in column " + raw.labels[j]);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    if (x[idx.front()] == x[idx.back()]) throw DomainError("rank_pit: constant column " + raw.labels[j]);
    auto u = out.column(j);
    const double denom = static_cast<double>(raw.T + 1);
    for (std::size_t k = 0; k < raw.T;) {
      std::size_t e = k + 1;
      while (e < raw.T && x[idx[e]] == x[idx[k]]) ++e;
      double rank = 0.5 * static_cast<double>(k + 1 + e);  // mean of ranks k+1..e
      for (std::size_t m = k; m < e; ++m) u[idx[m]] = rank / denom;
      k = e;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string format_double(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

}  // namespace detail

// Header row of labels, then one numeric row per observation.
inline Panel parse_panel_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::trim(line).empty()) break;
  }
  if (detail::trim(line).empty()) throw ParseError("empty file, expected a header row", lineno);
  for (auto cell : detail::split_csv_line(line)) {
    auto l = detail::trim(cell);
    if (l.size() >= 2 && l.front() == '"' && l.back() == '"') l = l.substr(1, l.size() - 2);
    if (l.empty()) throw ParseError("empty column label", lineno, labels.size() + 1);
    labels.emplace_back(l);
  }
  const std::size_t d = labels.size();
  std::vector<std::vector<double>> cols(d);
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != d) {
      throw ParseError("expected " + std::to_string(d) + " values, found " +
                           std::to_string(cells.size()), lineno);
    }
    for (std::size_t j = 0; j < d; ++j) {
      auto c = detail::trim(cells[j]);
      if (c.empty()) throw ParseError("missing value", lineno, j + 1);
      if (c.front() == '+') c.remove_prefix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw ParseError("not a finite number: '" + std::string(c) + "'", lineno, j + 1);
      }
      cols[j].push_back(v);
    }
  }
  Panel p(labels, d ? cols[0].size() : 0);
  for (std::size_t j = 0; j < d; ++j) std::copy(cols[j].begin(), cols[j].end(), p.column(j).begin());
  return p;
}

inline Panel load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_panel_csv(in);
}

// Like load_panel, and additionally requires every value inside (0, 1).
inline Panel load_uniform_panel(const std::string& path) {
  Panel p = load_panel(path);
  if (p.T < 2) throw std::invalid_argument(path + ": need at least 2 rows");
  for (std::size_t j = 0; j < p.d(); ++j)
    for (std::size_t t = 0; t < p.T; ++t)
      if (!(p(t, j) > 0.0 && p(t, j) < 1.0)) {
        throw ParseError("value " + detail::format_double(p(t, j)) + " is not inside (0, 1)", t + 2,
                         j + 1);
      }
  return p;
}

inline void write_panel_csv(std::ostream& out, const Panel& p) {
  for (std::size_t j = 0; j < p.d(); ++j) out << (j ? "," : "") << p.labels[j];
  out << '\n';
  for (std::size_t t = 0; t < p.T; ++t) {
    for (std::size_t j = 0; j < p.d(); ++j) out << (j ? "," : "") << detail::format_double(p(t, j));
    out << '\n';
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void save_panel(const Panel& p, const std::string& path) {
  std::ostringstream ss;
  write_panel_csv(ss, p);
  write_text_file(path, ss.str());
}

// Columns t, then one column per named series.
inline void save_series(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                        const std::string& path) {
  std::size_t T = series.empty() ? 0 : series.front().second.size();
  for (const auto& s : series)
    if (s.second.size() != T) throw std::invalid_argument("save_series: unequal lengths");
  std::ostringstream ss;
  ss << 't';
  for (const auto& s : series) ss << ',' << s.first;
  ss << '\n';
  for (std::size_t t = 0; t < T; ++t) {
    ss << t + 1;
    for (const auto& s : series) ss << ',' << detail::format_double(s.second[t]);
    ss << '\n';
  }
  write_text_file(path, ss.str());
}

// ---------------------------------------------------------------------------
// JSON documents

namespace detail {

inline json edge_parameters_json(const EdgeModel& m) {
  switch (m.mode) {
    case EdgeMode::TimeVarying:
      return {{"mu", m.scar->mu}, {"phi", m.scar->phi}, {"sigma", m.scar->sigma}};
    case EdgeMode::Static:
      return {{"theta", *m.theta}, {"tau", theta_to_tau(m.family, *m.theta)}};
    case EdgeMode::Independence:
      return json::object();
  }
  return json::object();
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(where + ": field '" + key + "' has the wrong type");
  }
}

inline EdgeModel edge_from_json(const json& e, const std::string& where) {
  auto fam_code = require<std::string>(e, "family", where);
  auto mode_code = require<std::string>(e, "mode", where);
  auto fam = parse_family(fam_code);
  auto mode = parse_mode(mode_code);
  if (!fam) throw std::invalid_argument(where + ": unknown family '" + fam_code + "'");
  if (!mode) throw std::invalid_argument(where + ": unknown mode '" + mode_code + "'");
  EdgeModel m;
  const json params = e.contains("parameters") ? e.at("parameters") : json::object();
  switch (*mode) {
    case EdgeMode::TimeVarying:
      m = EdgeModel::make_tv(*fam, {require<double>(params, "mu", where),
                                    require<double>(params, "phi", where),
                                    require<double>(params, "sigma", where)});
      break;
    case EdgeMode::Static: {
      double theta = params.contains("theta") ? require<double>(params, "theta", where)
                                              : tau_to_theta(*fam, require<double>(params, "tau", where));
      m = EdgeModel::make_static(*fam, theta);
      break;
    }
    case EdgeMode::Independence:
      m = EdgeModel::independence();
      m.family = *fam;
      break;
  }
  if (e.contains("loglik")) m.loglik = require<double>(e, "loglik", where);
  if (e.contains("bic")) m.bic = require<double>(e, "bic", where);
  if (e.contains("converged")) m.converged = require<bool>(e, "converged", where);
  if (e.contains("boundary")) m.boundary = require<bool>(e, "boundary", where);
  if (e.contains("n_params") && require<int>(e, "n_params", where) != m.n_params) {
    throw std::invalid_argument(where + ": n_params does not match the mode");
  }
  return m;
}

inline json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') ++line, col = 1;
      else ++col;
    }
    throw ParseError(source + ": malformed JSON", line, col);
  }
}

}  // namespace detail

inline json spec_to_json(const DvineSpec& spec) {
  json edges = json::array();
  for (std::size_t j = 0; j < spec.trees.size(); ++j) {
    for (std::size_t i = 0; i < spec.trees[j].size(); ++i) {
      EdgeId id{static_cast<int>(j + 1), static_cast<int>(i + 1)};
      const EdgeModel& m = spec.trees[j][i];
      EdgeLabels l = edge_labels(spec.labels, id);
      edges.push_back({{"tree", id.tree},
                       {"position", id.position},
                       {"conditioned", l.conditioned},
                       {"conditioning", l.conditioning},
                       {"family", std::string(family_code(m.family))},
                       {"mode", std::string(mode_name(m.mode))},
                       {"parameters", detail::edge_parameters_json(m)}});
    }
  }
  return {{"ordering", spec.labels},
          {"max_tv_tree", spec.max_tv_tree},
          {"trunc_tree", spec.trunc_tree},
          {"edges", edges}};
}

// Reads a vine spec. Edges are located by (tree, position); missing edges are
// Independence. max_tv_tree and trunc_tree default to no restriction.
inline DvineSpec spec_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("vine spec: expected an object");
  auto labels = detail::require<std::vector<std::string>>(doc, "ordering", "vine spec");
  DvineSpec spec = DvineSpec::independence(labels);
  const int d = static_cast<int>(labels.size());
  if (doc.contains("max_tv_tree")) spec.max_tv_tree = detail::require<int>(doc, "max_tv_tree", "vine spec");
  if (doc.contains("trunc_tree")) spec.trunc_tree = detail::require<int>(doc, "trunc_tree", "vine spec");
  if (doc.contains("edges")) {
    const json& edges = doc.at("edges");
    if (!edges.is_array()) throw std::invalid_argument("vine spec: 'edges' must be an array");
    std::vector<bool> seen(d * d, false);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      std::string where = "vine spec edge #" + std::to_string(k + 1);
      int tree = detail::require<int>(edges[k], "tree", where);
      int pos = detail::require<int>(edges[k], "position", where);
      if (tree < 1 || tree > d - 1 || pos < 1 || pos > d - tree)
        throw std::invalid_argument(where + ": tree/position out of range");
      if (seen[tree * d + pos]) throw std::invalid_argument(where + ": duplicate edge");
      seen[tree * d + pos] = true;
      spec.edge({tree, pos}) = detail::edge_from_json(edges[k], where);
    }
  }
  spec.validate();
  return spec;
}

inline json fit_to_json(const DvineFit& fit) {
  json doc = spec_to_json(fit.spec);
  for (json& e : doc["edges"]) {
    int j = e["tree"].get<int>(), i = e["position"].get<int>();
    const EdgeModel& m = fit.spec.edge({j, i});
    e["loglik"] = m.loglik;
    e["n_params"] = m.n_params;
    e["bic"] = m.bic;
    e["converged"] = m.converged;
    e["boundary"] = m.boundary;
    json cands = json::array();
    if (j - 1 < static_cast<int>(fit.candidates.size()) &&
        i - 1 < static_cast<int>(fit.candidates[j - 1].size())) {
      for (const CandidateScore& c : fit.candidates[j - 1][i - 1]) {
        cands.push_back({{"family", std::string(family_code(c.family))},
                         {"mode", std::string(mode_name(c.mode))},
                         {"loglik", c.loglik},
                         {"bic", c.bic}});
      }
    }
    e["candidates"] = cands;
  }
  json fams = json::array();
  for (Family f : fit.families) fams.push_back(std::string(family_code(f)));
  doc["tree_bic"] = fit.tree_bic;
  doc["total_bic"] = fit.total_bic;
  doc["loglik"] = fit.loglik;
  doc["n_params"] = fit.spec.parameter_count();
  doc["trees_fitted"] = fit.trees_fitted;
  doc["seed"] = fit.seed;
  doc["config"] = {{"n_traj", fit.eis.n_traj},
                   {"max_fixed_point_iters", fit.eis.max_fixed_point_iters},
                   {"fp_tolerance", fit.eis.fp_tolerance},
                   {"families", fams},
                   {"max_tv_tree", fit.spec.max_tv_tree},
                   {"trunc_tree", fit.spec.trunc_tree}};
  return doc;
}

inline DvineFit fit_from_json(const json& doc) {
  DvineFit fit;
  fit.spec = spec_from_json(doc);
  const std::size_t d = fit.spec.d();
  fit.candidates.resize(d - 1);
  for (std::size_t j = 1; j < d; ++j) fit.candidates[j - 1].resize(d - j);
  for (const json& e : doc.at("edges")) {
    int j = e.at("tree").get<int>(), i = e.at("position").get<int>();
    if (!e.contains("candidates")) continue;
    for (const json& c : e.at("candidates")) {
      std::string where = "fit candidate";
      auto code = detail::require<std::string>(c, "family", where);
      auto fam = parse_family(code);
      auto mode = parse_mode(detail::require<std::string>(c, "mode", where));
      if (!fam || !mode) throw std::invalid_argument("fit candidate: bad family or mode");
      fit.candidates[j - 1][i - 1].push_back({*fam, *mode, detail::require<double>(c, "bic", where),
                                              detail::require<double>(c, "loglik", where)});
    }
  }
  fit.tree_bic = detail::require<std::vector<double>>(doc, "tree_bic", "fit");
  fit.total_bic = detail::require<double>(doc, "total_bic", "fit");
  fit.loglik = detail::require<double>(doc, "loglik", "fit");
  fit.trees_fitted = detail::require<int>(doc, "trees_fitted", "fit");
  fit.seed = detail::require<std::uint64_t>(doc, "seed", "fit");
  const json& cfg = doc.at("config");
  fit.eis.seed = fit.seed;
  fit.eis.n_traj = detail::require<std::size_t>(cfg, "n_traj", "fit config");
  fit.eis.max_fixed_point_iters = detail::require<int>(cfg, "max_fixed_point_iters", "fit config");
  fit.eis.fp_tolerance = detail::require<double>(cfg, "fp_tolerance", "fit config");
  for (const auto& code : detail::require<std::vector<std::string>>(cfg, "families", "fit config")) {
    auto f = parse_family(code);
    if (!f || *f == Family::Independence)
      throw std::invalid_argument("fit config: unknown family '" + code + "'");
    fit.families.push_back(*f);
  }
  return fit;
}

inline std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

inline void save_spec(const DvineSpec& spec, const std::string& path) {
  write_text_file(path, dump_json(spec_to_json(spec)));
}

inline DvineSpec load_spec(const std::string& path) {
  return spec_from_json(detail::parse_json_text(read_text_file(path), path));
}

inline void save_fit(const DvineFit& fit, const std::string& path) {
  write_text_file(path, dump_json(fit_to_json(fit)));
}

inline DvineFit load_fit(const std::string& path) {
  return fit_from_json(detail::parse_json_text(read_text_file(path), path));
}

// Cumulative BIC per tree, one row per tree.
inline void save_tree_bic(const DvineFit& fit, const std::string& path) {
  std::ostringstream ss;
  ss << "tree,edges,n_params,partial_bic\n";
  int params = 0;
  for (std::size_t j = 0; j < fit.tree_bic.size(); ++j) {
    for (const EdgeModel& m : fit.spec.trees[j]) params += m.n_params;
    ss << j + 1 << ',' << fit.spec.trees[j].size() << ',' << params << ','
       << detail::format_double(fit.tree_bic[j]) << '\n';
  }
  write_text_file(path, ss.str());
}

}  // namespace dvscar
