#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dvscar {

using Rng = std::mt19937_64;

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic child seed from a parent seed and a path of indices, e.g.
// (global seed, tree, edge). Independent of any scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : path) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

// Row-major matrix of standard normal draws.
struct NormalMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }
};

inline NormalMatrix normal_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  NormalMatrix m{rows, cols, std::vector<double>(rows * cols)};
  for (double& x : m.values) x = z(rng);
  return m;
}

inline std::vector<double> normal_vector(std::size_t n, std::uint64_t seed) {
  return normal_matrix(1, n, seed).values;
}

}  // namespace dvscar
