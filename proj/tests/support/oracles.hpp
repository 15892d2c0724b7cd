#pragma once

// Independent reference implementations used only by tests: adaptive
// quadrature for the weighting calculus and a sort-based top-N membership
// recall that cross-checks the rank-counting implementation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace testsupport {

inline double simpson_slice(const std::function<double(double)>& f, double a,
                            double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

inline double adaptive_simpson_impl(const std::function<double(double)>& f,
                                    double a, double b, double tol, double whole,
                                    int depth) {
  const double c = 0.5 * (a + b);
  const double left = simpson_slice(f, a, c);
  const double right = simpson_slice(f, c, b);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_impl(f, a, c, tol / 2.0, left, depth - 1) +
         adaptive_simpson_impl(f, c, b, tol / 2.0, right, depth - 1);
}

/// Adaptive Simpson quadrature of f over [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-9) {
  if (a == b) return 0.0;
  return adaptive_simpson_impl(f, a, b, tol, simpson_slice(f, a, b), 48);
}

/// Membership-form recall: sorts each user's catalog scores and asks whether
/// the positive belongs to the N largest, with ties broken against the
/// positive. Completely independent of the rank-counting path.
inline double topn_membership_recall(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::size_t>& positive_index, int n) {
  std::size_t hits = 0;
  for (std::size_t u = 0; u < scores.size(); ++u) {
    const std::vector<double>& row = scores[u];
    const std::size_t pos = positive_index[u];
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (row[a] != row[b]) return row[a] > row[b];
      // Equal scores: negatives outrank the positive; otherwise keep a
      // stable index order.
      if ((a == pos) != (b == pos)) return b == pos;
      return a < b;
    });
    for (std::size_t k = 0; k < std::min<std::size_t>(n, order.size()); ++k) {
      if (order[k] == pos) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace testsupport
