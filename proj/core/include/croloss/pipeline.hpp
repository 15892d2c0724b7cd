#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "croloss/data.hpp"
#include "croloss/losses.hpp"
#include "croloss/model.hpp"
#include "croloss/ranking.hpp"

namespace croloss {

/// Forward pass of one batch: user vectors per sample, item vectors once per
/// unique item (targets and shared negatives), and per-sample gap vectors
/// with negatives colliding with the sample's own target dropped.
struct ScoredBatch {
  std::vector<UserCache> users;                       // per sample
  std::vector<ItemCache> items;                       // unique, first-appearance order
  std::vector<std::size_t> target_slot;               // per sample
  std::vector<std::vector<std::size_t>> negative_slots;  // per sample, kept only
  std::vector<double> positive_scores;                // per sample
  std::vector<GapVector> gaps;                        // per sample
  std::size_t degenerate_scores = 0;
};

ScoredBatch score_batch(const TwoTowerModel& m, const Batch& batch,
                        std::span<const TrainingSample> samples);

/// Routes score-level loss gradients back through the towers. `grad_scale`
/// multiplies every upstream gradient (the trainer passes 1/batch-positives
/// so the learning rate is batch-size-robust).
ModelGradients batch_backward(const TwoTowerModel& m, const ScoredBatch& scored,
                              const LossOutput& loss, double grad_scale);

}  // namespace croloss
