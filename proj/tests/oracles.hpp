// Independent reference implementations used only by tests. These stay
// deliberately naive (dense matrices, O(n^2)/O(n^3) loops) and share no code
// with the library paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mhccl/matrix.hpp"

namespace oracle {

inline double dist2(const mhccl::MatF& pts, std::size_t i, std::size_t j) {
  double acc = 0.0;
  for (std::size_t d = 0; d < pts.cols; ++d) {
    const double diff = double(pts[i][d]) - double(pts[j][d]);
    acc += diff * diff;
  }
  return acc;
}

inline std::vector<int> brute_first_neighbors(const mhccl::MatF& pts) {
  const std::size_t n = pts.rows;
  std::vector<int> omega(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = dist2(pts, i, j);
      if (d < best) {
        best = d;
        omega[i] = int(j);
      }
    }
  }
  return omega;
}

inline std::vector<std::vector<bool>> brute_adjacency(const std::vector<int>& omega) {
  const std::size_t n = omega.size();
  std::vector<std::vector<bool>> a(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (omega[i] == int(j) || omega[j] == int(i) || omega[i] == omega[j]) a[i][j] = true;
    }
  return a;
}

// Component labels numbered by smallest member index, via dense DFS.
inline std::vector<int> brute_components(const std::vector<std::vector<bool>>& a, int* count) {
  const std::size_t n = a.size();
  std::vector<int> labels(n, -1);
  int next = 0;
  std::function<void(std::size_t, int)> dfs = [&](std::size_t u, int c) {
    labels[u] = c;
    for (std::size_t w = 0; w < n; ++w)
      if (a[u][w] && labels[w] < 0) dfs(w, c);
  };
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0) dfs(i, next++);
  if (count) *count = next;
  return labels;
}

// Rand index between two labelings over the same points.
inline double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ++total;
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa == sb) ++agree;
    }
  return total ? double(agree) / double(total) : 1.0;
}

// Central finite difference of f at x with step h.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

}  // namespace oracle
