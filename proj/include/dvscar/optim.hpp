#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace dvscar {

struct NelderMeadOptions {
  int max_evals = 400;
  double f_abs_tol = 1e-2;  // spread of function values across the simplex
  double x_tol = 1e-2;      // max vertex distance (inf-norm) from the best vertex
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (reflection 1, expansion 2,
// contraction 1/2, shrink 1/2). Non-finite objective values are treated as +inf.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, const std::vector<double>& step,
                                    const NelderMeadOptions& opt = {}) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evals;
    double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> s(n + 1, x0);
  for (std::size_t k = 0; k < n; ++k) s[k + 1][k] += step[k];
  std::vector<double> fs(n + 1);
  for (std::size_t k = 0; k <= n; ++k) fs[k] = eval(s[k]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> c(n), xr(n), xe(n), xc(n);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      s2[k] = s[order[k]];
      f2[k] = fs[order[k]];
    }
    s.swap(s2);
    fs.swap(f2);
  };

  while (true) {
    sort_simplex();
    double diam = 0.0;
    for (std::size_t k = 1; k <= n; ++k)
      for (std::size_t j = 0; j < n; ++j) diam = std::max(diam, std::abs(s[k][j] - s[0][j]));
    if (std::isfinite(fs[n]) && fs[n] - fs[0] <= opt.f_abs_tol && diam <= opt.x_tol) {
      res.converged = true;
      break;
    }
    if (res.evals >= opt.max_evals) break;

    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[j] += s[k][j] / static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) xr[j] = c[j] + (c[j] - s[n][j]);
    double fr = eval(xr);
    if (fr < fs[0]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = c[j] + 2.0 * (xr[j] - c[j]);
      double fe = eval(xe);
      if (fe < fr) {
        s[n] = xe;
        fs[n] = fe;
      } else {
        s[n] = xr;
        fs[n] = fr;
      }
    } else if (fr < fs[n - 1]) {
      s[n] = xr;
      fs[n] = fr;
    } else {
      bool outside = fr < fs[n];
      const std::vector<double>& towards = outside ? xr : s[n];
      for (std::size_t j = 0; j < n; ++j) xc[j] = c[j] + 0.5 * (towards[j] - c[j]);
      double fc = eval(xc);
      if (fc < (outside ? fr : fs[n])) {
        s[n] = xc;
        fs[n] = fc;
      } else {
        for (std::size_t k = 1; k <= n; ++k) {
          for (std::size_t j = 0; j < n; ++j) s[k][j] = s[0][j] + 0.5 * (s[k][j] - s[0][j]);
          fs[k] = eval(s[k]);
        }
      }
    }
  }
  res.x = s[0];
  res.f = fs[0];
  return res;
}

}  // namespace dvscar
