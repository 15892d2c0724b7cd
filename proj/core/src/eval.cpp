#include "croloss/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace croloss {

namespace {

std::vector<double> unit_vector(std::span<const double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

}  // namespace

EvalReport recall_at_n(const TwoTowerModel& m,
                       std::span<const TrainingSample> samples,
                       std::span<const int> ns, bool exclude_history,
                       std::string mode) {
  for (int n : ns) {
    if (n < 1 || n > m.catalog) {
      throw std::invalid_argument("recall N " + std::to_string(n) +
                                  " outside [1, catalog]");
    }
  }

  // All item vectors once, normalized so each candidate score is one dot.
  std::vector<std::vector<double>> item_unit;
  item_unit.reserve(m.catalog);
  for (ItemId id = 0; id < m.catalog; ++id) {
    item_unit.push_back(unit_vector(item_forward(m, id).tower.out));
  }

  EvalReport report;
  report.mode = std::move(mode);
  report.exclude_history = exclude_history;
  report.num_pairs = static_cast<std::int64_t>(samples.size());

  std::vector<int> sorted_ns(ns.begin(), ns.end());
  std::sort(sorted_ns.begin(), sorted_ns.end());
  std::vector<std::int64_t> hits(sorted_ns.size(), 0);

  std::unordered_set<ItemId> skip;
  for (const TrainingSample& sample : samples) {
    const std::vector<double> user =
        unit_vector(user_forward(m, sample.history).tower.out);
    const double positive = m.tau * [&] {
      double acc = 0.0;
      const auto& v = item_unit[sample.target];
      for (std::size_t i = 0; i < user.size(); ++i) acc += user[i] * v[i];
      return std::clamp(acc, -1.0, 1.0);
    }();

    skip.clear();
    if (exclude_history) {
      skip.insert(sample.history.begin(), sample.history.end());
      skip.erase(sample.target);  // the positive always stays a candidate
    }

    std::int64_t at_or_above = 0;
    for (ItemId id = 0; id < m.catalog; ++id) {
      if (id == sample.target) continue;
      if (exclude_history && skip.contains(id)) continue;
      double acc = 0.0;
      const auto& v = item_unit[id];
      for (std::size_t i = 0; i < user.size(); ++i) acc += user[i] * v[i];
      if (m.tau * std::clamp(acc, -1.0, 1.0) >= positive) ++at_or_above;
    }
    const std::int64_t rank = 1 + at_or_above;
    for (std::size_t k = 0; k < sorted_ns.size(); ++k) {
      if (rank <= sorted_ns[k]) ++hits[k];
    }
  }

  for (std::size_t k = 0; k < sorted_ns.size(); ++k) {
    report.recall_at[sorted_ns[k]] =
        samples.empty() ? 0.0
                        : static_cast<double>(hits[k]) /
                              static_cast<double>(samples.size());
  }
  return report;
}

std::int64_t brute_force_rank(std::span<const double> scores,
                              std::size_t positive_index) {
  if (positive_index >= scores.size()) {
    throw std::invalid_argument("positive index outside the score vector");
  }
  const double positive = scores[positive_index];
  std::int64_t at_or_above = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == positive_index) continue;
    if (scores[i] >= positive) ++at_or_above;
  }
  return 1 + at_or_above;
}

FiniteDiffResult finite_diff_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> point, std::span<const double> analytic_grad,
    double step) {
  if (point.size() != analytic_grad.size()) {
    throw std::invalid_argument("gradient length does not match the point");
  }
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");

  std::vector<double> x(point.begin(), point.end());
  FiniteDiffResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double above = f(x);
    x[i] = saved - step;
    const double below = f(x);
    x[i] = saved;
    if (!std::isfinite(above) || !std::isfinite(below)) {
      throw std::runtime_error("non-finite evaluation during finite differences");
    }
    const double fd = (above - below) / (2.0 * step);
    const double denom = std::max({1.0, std::abs(fd), std::abs(analytic_grad[i])});
    const double rel = std::abs(fd - analytic_grad[i]) / denom;
    if (rel > result.max_rel_err) {
      result.max_rel_err = rel;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace croloss
