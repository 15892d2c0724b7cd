#include "croloss/ranking.hpp"

#include <stdexcept>

#include "croloss/numeric.hpp"

namespace croloss {

double rank_exact(const GapVector& g) {
  if (g.sample_scale != 1.0) {
    throw std::invalid_argument(
        "rank_exact requires sample_scale == 1 (full-catalog gaps)");
  }
  std::int64_t at_or_above = 0;
  for (double gap : g.gaps) {
    if (gap >= 0.0) ++at_or_above;
  }
  return 1.0 + static_cast<double>(at_or_above);
}

double rank_smooth(const GapVector& g, const Kernel& k) {
  CompensatedSum acc;
  acc.add(1.0);
  for (double gap : g.gaps) acc.add(k.eval(gap));
  return g.sample_scale * acc.value();
}

std::vector<double> rank_smooth_grad(const GapVector& g, const Kernel& k) {
  if (!k.differentiable()) {
    throw std::invalid_argument("rank_smooth_grad requires a differentiable kernel");
  }
  std::vector<double> grad(g.gaps.size());
  for (std::size_t i = 0; i < g.gaps.size(); ++i) {
    grad[i] = g.sample_scale * k.deriv(g.gaps[i]);
  }
  return grad;
}

AssembledGaps assemble_gaps(double positive_score,
                            std::span<const double> negative_scores,
                            std::span<const std::int64_t> negative_ids,
                            std::int64_t positive_id,
                            std::int64_t catalog_size) {
  if (negative_scores.size() != negative_ids.size()) {
    throw std::invalid_argument("negative scores/ids length mismatch");
  }
  AssembledGaps out;
  out.gaps.gaps.reserve(negative_scores.size());
  out.kept.reserve(negative_scores.size());
  for (std::size_t i = 0; i < negative_scores.size(); ++i) {
    if (negative_ids[i] == positive_id) continue;
    out.gaps.gaps.push_back(negative_scores[i] - positive_score);
    out.kept.push_back(i);
  }
  const double effective = 1.0 + static_cast<double>(out.kept.size());
  out.gaps.sample_scale = static_cast<double>(catalog_size) / effective;
  if (out.gaps.sample_scale < 1.0) {
    throw std::invalid_argument(
        "sampled negative pool exceeds catalog; reduce n_rn or batch size");
  }
  return out;
}

}  // namespace croloss
