#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "croloss/kernels.hpp"

namespace croloss {

/// Score gaps of one positive against its negatives: gaps[i] = negative
/// score minus positive score. sample_scale is catalog size over effective
/// sampled-set size; 1 when the negatives are the full catalog minus the
/// positive.
struct GapVector {
  std::vector<double> gaps;
  double sample_scale = 1.0;
};

/// Exact rank 1 + #{gaps >= 0}. Ties count against the positive. Requires
/// sample_scale == 1 (the exact rank is undefined under sampling).
double rank_exact(const GapVector& g);

/// Kernel-smoothed rank estimate: sample_scale * (1 + sum phi(gap)).
/// With scale 1 this is the full-catalog smoothed rank.
double rank_smooth(const GapVector& g, const Kernel& k);

/// d(rank_smooth)/d(gap_i) = sample_scale * phi'(gap_i). Rejects UnitStep.
std::vector<double> rank_smooth_grad(const GapVector& g, const Kernel& k);

/// Builds a gap vector from raw scores. Sampled negatives that collide with
/// the positive item are dropped (they are not true negatives); the scale is
/// catalog / (1 + kept negatives). `kept` maps each emitted gap back to its
/// position in the negative arrays.
struct AssembledGaps {
  GapVector gaps;
  std::vector<std::size_t> kept;
};

AssembledGaps assemble_gaps(double positive_score,
                            std::span<const double> negative_scores,
                            std::span<const std::int64_t> negative_ids,
                            std::int64_t positive_id,
                            std::int64_t catalog_size);

}  // namespace croloss
