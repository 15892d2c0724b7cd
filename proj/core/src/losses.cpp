#include "croloss/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "croloss/numeric.hpp"

namespace croloss {

namespace {

// Largest representable rank inside the weighting support.
double support_cap(const Weighting& w) {
  return std::nextafter(static_cast<double>(w.catalog_size()) + 1.0, 0.0);
}

double negate_sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return -acc.value();
}

}  // namespace

LossFamily parse_loss_family(std::string_view name) {
  if (name == "croloss") return LossFamily::CROLoss;
  if (name == "croloss_lambda") return LossFamily::CROLossLambda;
  if (name == "softmax_ce") return LossFamily::SoftmaxCE;
  if (name == "triplet") return LossFamily::Triplet;
  if (name == "bpr") return LossFamily::BPR;
  throw std::invalid_argument("unknown loss family: " + std::string(name));
}

std::string_view loss_family_name(LossFamily family) {
  switch (family) {
    case LossFamily::CROLoss:
      return "croloss";
    case LossFamily::CROLossLambda:
      return "croloss_lambda";
    case LossFamily::SoftmaxCE:
      return "softmax_ce";
    case LossFamily::Triplet:
      return "triplet";
    case LossFamily::BPR:
      return "bpr";
  }
  return "?";
}

void validate_loss_spec(const LossSpec& spec) {
  switch (spec.family) {
    case LossFamily::CROLoss:
      if (!spec.kernel.differentiable()) {
        throw std::invalid_argument(
            "croloss requires a differentiable comparison kernel");
      }
      if (!spec.weighting) {
        throw std::invalid_argument("croloss requires a weighting");
      }
      break;
    case LossFamily::CROLossLambda:
      if (!spec.kernel2.differentiable()) {
        throw std::invalid_argument(
            "croloss_lambda requires a differentiable descent kernel (kernel2)");
      }
      if (!spec.weighting) {
        throw std::invalid_argument("croloss_lambda requires a weighting");
      }
      break;
    case LossFamily::Triplet:
      if (!(spec.margin >= 0.0)) {
        throw std::invalid_argument("triplet margin must be >= 0");
      }
      break;
    case LossFamily::SoftmaxCE:
    case LossFamily::BPR:
      break;
  }
}

LossOutput croloss_forward(const LossSpec& spec,
                           std::span<const GapVector> batch_gaps) {
  if (!spec.kernel.differentiable()) {
    throw std::invalid_argument(
        "croloss requires a differentiable comparison kernel");
  }
  const Weighting& w = spec.weighting.value();
  const double cap = support_cap(w);

  LossOutput out;
  out.grad_pos.reserve(batch_gaps.size());
  out.grad_neg.reserve(batch_gaps.size());
  CompensatedSum value;
  for (const GapVector& g : batch_gaps) {
    const double rhat = rank_smooth(g, spec.kernel);
    value.add(w.cdf(rhat));
    const double density = w.density(std::min(rhat, cap));
    std::vector<double> grad = rank_smooth_grad(g, spec.kernel);
    for (double& gi : grad) gi *= density;
    out.grad_pos.push_back(negate_sum(grad));
    out.grad_neg.push_back(std::move(grad));
  }
  out.value = value.value();
  return out;
}

LossOutput croloss_lambda_forward(const LossSpec& spec,
                                  std::span<const GapVector> batch_gaps) {
  if (!spec.kernel2.differentiable()) {
    throw std::invalid_argument(
        "croloss_lambda requires a differentiable descent kernel (kernel2)");
  }
  const Weighting& w = spec.weighting.value();
  const double cap = support_cap(w);

  LossOutput out;
  out.grad_pos.reserve(batch_gaps.size());
  out.grad_neg.reserve(batch_gaps.size());
  CompensatedSum value;
  for (const GapVector& g : batch_gaps) {
    // lambda is a frozen multiplier: no gradient flows through kernel1.
    const double rank1 = rank_smooth(g, spec.kernel1);
    const double lambda = w.density(std::min(rank1, cap));
    value.add(lambda * rank_smooth(g, spec.kernel2));
    std::vector<double> grad = rank_smooth_grad(g, spec.kernel2);
    for (double& gi : grad) gi *= lambda;
    out.grad_pos.push_back(negate_sum(grad));
    out.grad_neg.push_back(std::move(grad));
  }
  out.value = value.value();
  return out;
}

LossOutput softmax_ce(std::span<const GapVector> batch_gaps) {
  LossOutput out;
  out.grad_pos.reserve(batch_gaps.size());
  out.grad_neg.reserve(batch_gaps.size());
  CompensatedSum value;
  for (const GapVector& g : batch_gaps) {
    // -log softmax(positive) == log(1 + sum exp(gap)); shift by the largest
    // exponent so nothing overflows.
    double peak = 0.0;
    for (double gap : g.gaps) peak = std::max(peak, gap);
    CompensatedSum denom;
    denom.add(std::exp(-peak));
    for (double gap : g.gaps) denom.add(std::exp(gap - peak));
    const double z = denom.value();
    value.add(peak + std::log(z));

    std::vector<double> grad(g.gaps.size());
    for (std::size_t i = 0; i < g.gaps.size(); ++i) {
      grad[i] = std::exp(g.gaps[i] - peak) / z;
    }
    out.grad_pos.push_back(negate_sum(grad));
    out.grad_neg.push_back(std::move(grad));
  }
  out.value = value.value();
  return out;
}

LossOutput triplet(std::span<const GapVector> batch_gaps, double margin) {
  if (!(margin >= 0.0)) {
    throw std::invalid_argument("triplet margin must be >= 0");
  }
  const Kernel hinge = make_kernel(KernelKind::Hinge, margin);
  LossOutput out;
  out.grad_pos.reserve(batch_gaps.size());
  out.grad_neg.reserve(batch_gaps.size());
  CompensatedSum value;
  for (const GapVector& g : batch_gaps) {
    std::vector<double> grad(g.gaps.size());
    for (std::size_t i = 0; i < g.gaps.size(); ++i) {
      value.add(hinge.eval(g.gaps[i]));
      grad[i] = hinge.deriv(g.gaps[i]);
    }
    out.grad_pos.push_back(negate_sum(grad));
    out.grad_neg.push_back(std::move(grad));
  }
  out.value = value.value();
  return out;
}

LossOutput bpr(std::span<const GapVector> batch_gaps) {
  const Kernel softplus = make_kernel(KernelKind::Softplus);
  LossOutput out;
  out.grad_pos.reserve(batch_gaps.size());
  out.grad_neg.reserve(batch_gaps.size());
  CompensatedSum value;
  for (const GapVector& g : batch_gaps) {
    std::vector<double> grad(g.gaps.size());
    for (std::size_t i = 0; i < g.gaps.size(); ++i) {
      value.add(softplus.eval(g.gaps[i]));
      grad[i] = softplus.deriv(g.gaps[i]);
    }
    out.grad_pos.push_back(negate_sum(grad));
    out.grad_neg.push_back(std::move(grad));
  }
  out.value = value.value();
  return out;
}

LossOutput loss_forward(const LossSpec& spec,
                        std::span<const GapVector> batch_gaps) {
  switch (spec.family) {
    case LossFamily::CROLoss:
      return croloss_forward(spec, batch_gaps);
    case LossFamily::CROLossLambda:
      return croloss_lambda_forward(spec, batch_gaps);
    case LossFamily::SoftmaxCE:
      return softmax_ce(batch_gaps);
    case LossFamily::Triplet:
      return triplet(batch_gaps, spec.margin);
    case LossFamily::BPR:
      return bpr(batch_gaps);
  }
  throw std::logic_error("unreachable loss family");
}

}  // namespace croloss
