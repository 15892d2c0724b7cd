#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "croloss/data.hpp"
#include "croloss/model.hpp"

namespace croloss {

/// Full-catalog recall report. recall_at values are fractions in [0, 1],
/// micro-averaged over positive pairs.
struct EvalReport {
  std::map<int, double> recall_at;
  std::int64_t num_pairs = 0;
  std::string mode = "all";  // which positions contributed targets
  std::string tie_policy = "positive_loses_ties";
  bool exclude_history = false;
};

/// Scores every sample against the whole catalog (item vectors precomputed
/// once) and counts exact ranks: rank = 1 + #{candidates with score >= the
/// positive's}, so the positive loses ties. `exclude_history` removes the
/// sample's own history items from the candidate set.
EvalReport recall_at_n(const TwoTowerModel& m,
                       std::span<const TrainingSample> samples,
                       std::span<const int> ns, bool exclude_history = false,
                       std::string mode = "all");

/// Reference rank of one positive inside a full score vector, under the same
/// tie policy.
std::int64_t brute_force_rank(std::span<const double> scores,
                              std::size_t positive_index);

/// Central-difference gradient verification: perturbs each coordinate of
/// `point` by +-step and compares against the supplied analytic gradient.
/// Relative error is |fd - analytic| / max(1, |fd|, |analytic|).
struct FiniteDiffResult {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

FiniteDiffResult finite_diff_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, std::span<const double> analytic_grad,
    double step = 1e-5);

}  // namespace croloss
