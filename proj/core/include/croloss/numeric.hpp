#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace croloss {

/// Neumaier-compensated accumulator. Gap sums run over thousands of terms
/// spanning many orders of magnitude, so plain summation is not enough for
/// the tolerances the gradient checks demand.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace croloss
