#include "croloss/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace croloss {

namespace {

// Beyond this the asymptotic forms of sigmoid/softplus are used.
constexpr double kSaturation = 30.0;

double sigmoid(double x) {
  if (x > kSaturation) return 1.0;
  if (x < -kSaturation) return std::exp(x);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > kSaturation) return x;
  if (x < -kSaturation) return std::exp(x);
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

double Kernel::eval(double x) const {
  switch (kind) {
    case KernelKind::UnitStep:
      return x < 0.0 ? 0.0 : 1.0;
    case KernelKind::Hinge:
      return std::max(x + margin, 0.0);
    case KernelKind::Sigmoid:
      return sigmoid(x);
    case KernelKind::Exponential:
      return std::exp(x);
    case KernelKind::Softplus:
      return softplus(x);
  }
  throw std::logic_error("unreachable kernel kind");
}

double Kernel::deriv(double x) const {
  switch (kind) {
    case KernelKind::UnitStep:
      throw std::invalid_argument(
          "unit_step kernel has no derivative; it is only usable as the "
          "rank-estimation kernel of the lambda loss");
    case KernelKind::Hinge:
      return x < -margin ? 0.0 : 1.0;
    case KernelKind::Sigmoid: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case KernelKind::Exponential:
      return std::exp(x);
    case KernelKind::Softplus:
      return sigmoid(x);
  }
  throw std::logic_error("unreachable kernel kind");
}

Kernel make_kernel(KernelKind kind, double margin) {
  if (kind == KernelKind::Hinge) {
    if (!(margin >= 0.0)) {
      throw std::invalid_argument("hinge kernel margin must be >= 0");
    }
    return Kernel{kind, margin};
  }
  return Kernel{kind, 0.0};
}

AdmissibilityReport is_admissible(const Kernel& k) {
  AdmissibilityReport r;

  // All five kinds are differentiable except at finitely many points. For
  // the differentiable kinds we confirm numerically that deriv matches a
  // central difference away from the hinge kink.
  r.differentiable_ae = true;
  if (k.differentiable()) {
    const double h = 1e-6;
    for (double x = -50.0; x <= 50.0; x += 0.5) {
      if (k.kind == KernelKind::Hinge && std::abs(x + k.margin) < 1e-3) {
        continue;
      }
      double fd = (k.eval(x + h) - k.eval(x - h)) / (2.0 * h);
      double an = k.deriv(x);
      if (std::abs(fd - an) > 1e-4 * std::max(1.0, std::abs(an))) {
        r.differentiable_ae = false;
        break;
      }
    }
  }

  r.monotone = true;
  double prev = k.eval(-50.0);
  for (double x = -50.0 + 0.25; x <= 50.0; x += 0.25) {
    double cur = k.eval(x);
    if (cur < prev) {
      r.monotone = false;
      break;
    }
    prev = cur;
  }

  r.vanishes_left = k.eval(-50.0) < 1e-6 * std::max(1.0, k.eval(0.0));

  double at_zero = k.eval(0.0);
  r.origin_in_band = at_zero >= 0.5 && at_zero <= 1.0;

  // Sigmoid approaches 1 from below, so allow a 1e-9 slack at x = 50.
  r.reaches_one = k.eval(50.0) >= 1.0 - 1e-9;

  return r;
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "unit_step") return KernelKind::UnitStep;
  if (name == "hinge") return KernelKind::Hinge;
  if (name == "sigmoid") return KernelKind::Sigmoid;
  if (name == "exponential") return KernelKind::Exponential;
  if (name == "softplus") return KernelKind::Softplus;
  throw std::invalid_argument("unknown kernel name: " + std::string(name));
}

std::string_view kernel_kind_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::UnitStep:
      return "unit_step";
    case KernelKind::Hinge:
      return "hinge";
    case KernelKind::Sigmoid:
      return "sigmoid";
    case KernelKind::Exponential:
      return "exponential";
    case KernelKind::Softplus:
      return "softplus";
  }
  return "?";
}

}  // namespace croloss
