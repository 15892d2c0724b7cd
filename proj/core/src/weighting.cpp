#include "croloss/weighting.hpp"

#include <cmath>
#include <stdexcept>

namespace croloss {

namespace {
// Below this distance from alpha = 1 the power-law closed form cancels
// catastrophically; switch to the logarithmic branch.
constexpr double kLogBranchTol = 1e-9;
}  // namespace

Weighting::Weighting(double alpha, std::int64_t catalog_size)
    : alpha_(alpha), catalog_(catalog_size) {
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument(
        "weighting alpha must be >= 0 (uniform to fast-decaying)");
  }
  if (catalog_size < 1) {
    throw std::invalid_argument("weighting catalog size must be >= 1");
  }
  const double upper = static_cast<double>(catalog_) + 1.0;
  log_branch_ = std::abs(alpha_ - 1.0) < kLogBranchTol;
  if (log_branch_) {
    z_ = std::log(upper);
  } else {
    z_ = (1.0 - std::pow(upper, 1.0 - alpha_)) / (alpha_ - 1.0);
  }
}

double Weighting::density(double x) const {
  const double upper = static_cast<double>(catalog_) + 1.0;
  if (x >= upper) return 0.0;
  if (x < 1.0) x = 1.0;
  return std::pow(x, -alpha_) / z_;
}

double Weighting::cdf(double n) const {
  const double upper = static_cast<double>(catalog_) + 1.0;
  if (n <= 1.0) return 0.0;
  if (n >= upper) return 1.0;
  if (log_branch_) {
    return std::log(n) / std::log(upper);
  }
  return (1.0 - std::pow(n, 1.0 - alpha_)) /
         (1.0 - std::pow(upper, 1.0 - alpha_));
}

}  // namespace croloss
