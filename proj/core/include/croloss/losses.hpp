#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "croloss/kernels.hpp"
#include "croloss/ranking.hpp"
#include "croloss/weighting.hpp"

namespace croloss {

enum class LossFamily { CROLoss, CROLossLambda, SoftmaxCE, Triplet, BPR };

LossFamily parse_loss_family(std::string_view name);
std::string_view loss_family_name(LossFamily family);

struct LossSpec {
  LossFamily family = LossFamily::CROLoss;
  Kernel kernel;                      // CROLoss comparison kernel
  Kernel kernel1;                     // lambda rank-estimation kernel (may be UnitStep)
  Kernel kernel2;                     // lambda descent kernel
  std::optional<Weighting> weighting; // CROLoss families
  double margin = 5.0;                // triplet margin
};

/// Throws std::invalid_argument for an unusable combination:
/// non-differentiable descent kernel, missing weighting, negative margin.
void validate_loss_spec(const LossSpec& spec);

/// Batch loss with analytic gradients at the score level. Values are summed
/// over positives; grad_pos[p] and grad_neg[p][i] are the derivatives with
/// respect to the positive score and the i-th kept negative score. Since the
/// loss sees scores only through gaps, grad_pos[p] == -sum(grad_neg[p]).
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad_pos;
  std::vector<std::vector<double>> grad_neg;
};

/// W_alpha of the smoothed sampled rank, summed over positives. The rank fed
/// to the density is clamped into the weighting support [1, catalog+1) so
/// convex kernels (which can push the estimate past the catalog bound) keep
/// a finite, nonzero pull.
LossOutput croloss_forward(const LossSpec& spec,
                           std::span<const GapVector> batch_gaps);

/// Stop-gradient variant: the density multiplier lambda = w_alpha(R_phi1) is
/// treated as a constant; kernel2 alone drives the per-gap descent. The
/// reported value sum(lambda * R_phi2) is a monitoring scalar consistent
/// with the declared gradient, not comparable across alpha.
LossOutput croloss_lambda_forward(const LossSpec& spec,
                                  std::span<const GapVector> batch_gaps);

/// -log softmax of the positive against its negatives, log-sum-exp
/// stabilized. Ignores sample_scale.
LossOutput softmax_ce(std::span<const GapVector> batch_gaps);

/// sum (gap + margin)_+ with subgradient 1 at the kink.
LossOutput triplet(std::span<const GapVector> batch_gaps, double margin);

/// sum softplus(gap); per-gap gradient sigmoid(gap).
LossOutput bpr(std::span<const GapVector> batch_gaps);

/// Family dispatch.
LossOutput loss_forward(const LossSpec& spec,
                        std::span<const GapVector> batch_gaps);

}  // namespace croloss
