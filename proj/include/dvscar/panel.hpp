#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dvscar/errors.hpp"

namespace dvscar {

// T x d matrix stored column by column, with one label per column.
struct Panel {
  std::vector<std::string> labels;
  std::size_t T = 0;
  std::vector<double> values;  // column-major, d * T

  Panel() = default;
  Panel(std::vector<std::string> labels_, std::size_t rows)
      : labels(std::move(labels_)), T(rows), values(labels.size() * rows, 0.0) {}

  std::size_t d() const noexcept { return labels.size(); }

  std::span<double> column(std::size_t j) { return {values.data() + j * T, T}; }
  std::span<const double> column(std::size_t j) const { return {values.data() + j * T, T}; }

  double& operator()(std::size_t t, std::size_t j) { return values[j * T + t]; }
  double operator()(std::size_t t, std::size_t j) const { return values[j * T + t]; }

  // Columns rearranged so that column k of the result is column order[k] here.
  Panel reordered(std::span<const std::size_t> order) const {
    std::vector<std::string> l;
    for (std::size_t k : order) l.push_back(labels.at(k));
    Panel out(std::move(l), T);
    for (std::size_t k = 0; k < order.size(); ++k) {
      auto src = column(order[k]);
      std::copy(src.begin(), src.end(), out.column(k).begin());
    }
    return out;
  }

  friend bool operator==(const Panel&, const Panel&) = default;
};

// Throws unless every entry lies strictly inside (0, 1). Coordinates in the
// message are 1-based data rows and columns.
inline void validate_uniform(const Panel& p) {
  if (p.values.size() != p.d() * p.T) throw std::invalid_argument("panel: size mismatch");
  for (std::size_t j = 0; j < p.d(); ++j) {
    for (std::size_t t = 0; t < p.T; ++t) {
      double x = p(t, j);
      if (!(x > 0.0 && x < 1.0)) {
        throw DomainError("value " + std::to_string(x) + " at row " + std::to_string(t + 1) +
                          ", column " + std::to_string(j + 1) + " (" + p.labels[j] +
                          ") is not inside (0, 1)");
      }
    }
  }
}

}  // namespace dvscar
