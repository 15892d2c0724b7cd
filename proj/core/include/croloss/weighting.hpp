#pragma once

#include <cstdint>

namespace croloss {

/// Power-law rank weighting over [1, catalog+1): density w(x) = x^-alpha / Z
/// with Z chosen so the density integrates to one over the support. Larger
/// alpha concentrates mass on small (good) ranks. Immutable after
/// construction and freely shareable across threads.
class Weighting {
 public:
  /// Throws std::invalid_argument for alpha < 0 or catalog_size < 1.
  Weighting(double alpha, std::int64_t catalog_size);

  double alpha() const { return alpha_; }
  std::int64_t catalog_size() const { return catalog_; }
  double normalizer() const { return z_; }

  /// w(x). Inputs below 1 evaluate at 1; inputs at or past catalog+1
  /// return 0.
  double density(double x) const;

  /// W(n) = integral of the density from 1 to n, clamped to [0, 1] so that
  /// W(1) = 0 and W(catalog+1) = 1 exactly.
  double cdf(double n) const;

 private:
  double alpha_;
  std::int64_t catalog_;
  double z_;
  bool log_branch_;  // |alpha - 1| below the cancellation threshold
};

inline Weighting make_weighting(double alpha, std::int64_t catalog_size) {
  return Weighting(alpha, catalog_size);
}

}  // namespace croloss
