#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dvscar/errors.hpp"

namespace dvscar {

namespace detail {

inline std::int64_t tied_pairs(std::span<const double> sorted) {
  std::int64_t pairs = 0, run = 1;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i < sorted.size() && sorted[i] == sorted[i - 1]) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs;
}

// Sorts v ascending by merge sort and returns the number of inversions.
inline std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf,
                                std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace detail

// Kendall's tau-a, (concordant - discordant) / (n choose 2), with ties
// contributing zero. Knight's O(n log n) algorithm.
inline double empirical_kendall_tau(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw std::invalid_argument("kendall tau: length mismatch");
  if (n < 2) throw std::invalid_argument("kendall tau: need at least 2 observations");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  if (xs.front() == xs.back()) throw DomainError("kendall tau: constant input");

  std::int64_t n1 = detail::tied_pairs(xs);
  std::int64_t n3 = 0, run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && xs[i] == xs[i - 1] && ys[i] == ys[i - 1]) {
      ++run;
    } else {
      n3 += run * (run - 1) / 2;
      run = 1;
    }
  }
  std::vector<double> buf(n);
  std::int64_t swaps = detail::merge_count(ys, buf, 0, n);
  if (ys.front() == ys.back()) throw DomainError("kendall tau: constant input");
  std::int64_t n2 = detail::tied_pairs(ys);

  auto nn = static_cast<std::int64_t>(n);
  std::int64_t n0 = nn * (nn - 1) / 2;
  std::int64_t diff = n0 - n1 - n2 + n3 - 2 * swaps;
  return static_cast<double>(diff) / static_cast<double>(n0);
}

}  // namespace dvscar
