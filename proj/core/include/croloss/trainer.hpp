#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "croloss/data.hpp"
#include "croloss/losses.hpp"
#include "croloss/model.hpp"

namespace croloss {

struct AdamParams {
  double lr = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected adaptive-moment update, in place over params/m/v.
/// `step` is the 1-based global step count. Throws on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, std::int64_t step,
               const AdamParams& p);

/// Moment accumulators shaped like the model gradients plus the global step
/// counter. Embedding moments are stored dense; only touched rows are
/// updated each step.
struct AdamState {
  ModelGradients m;
  ModelGradients v;
  std::int64_t step = 0;
};

AdamState init_adam_state(const TwoTowerModel& model);

struct TrainConfig {
  LossSpec loss;
  AdamParams adam;
  int epochs = 3;
  int eval_every = 200;  // steps between validation evaluations; 0 = epoch end only
  int patience = 5;      // evaluations without improvement before stopping; 0 = off
  std::uint64_t seed = 42;  // reserved for trainer-side randomization; the
                            // loop itself is deterministic given the stream
  int pivot_n = 50;         // model selection metric: validation Recall@pivot_n
  std::vector<int> eval_ns = {50, 100, 200, 500};
  bool verbose = false;     // progress lines on stderr
};

struct HistoryEntry {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  double loss = 0.0;  // mean per-positive training loss since the last entry
  std::map<int, double> recall;  // validation recall per N
};

struct TrainResult {
  TwoTowerModel model;  // best validation checkpoint (final model if no evals ran)
  std::vector<HistoryEntry> history;
  std::int64_t best_step = 0;
  double best_recall = 0.0;
  std::int64_t steps_run = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mini-batch loop: score batch, loss forward (dispatch on family), manual
/// backward, Adam update. The per-positive loss is averaged over the batch
/// before the update so the learning rate is robust to batch size.
/// Validation recall drives best-checkpoint retention and early stopping.
/// Throws TrainingDiverged with the batch id and parameter block on any
/// non-finite loss or gradient.
TrainResult train(const TwoTowerModel& init, BatchStream& stream,
                  std::span<const TrainingSample> train_samples,
                  std::span<const TrainingSample> validation_samples,
                  const TrainConfig& cfg);

}  // namespace croloss
