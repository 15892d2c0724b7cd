#pragma once

#include <string>
#include <string_view>

namespace croloss {

/// Comparison kernels used to smooth the rank statistic. UnitStep is the
/// exact (non-differentiable) comparator; the others are its monotone
/// surrogates.
enum class KernelKind { UnitStep, Hinge, Sigmoid, Exponential, Softplus };

struct Kernel {
  KernelKind kind = KernelKind::Softplus;
  double margin = 0.0;  // hinge only, in score units

  /// phi(x). Total over finite reals; sigmoid/softplus switch to their
  /// asymptotic forms beyond |x| = 30 so no intermediate overflows.
  double eval(double x) const;

  /// phi'(x). The hinge kink at x = -margin returns the right subgradient 1.
  /// Throws std::invalid_argument for UnitStep.
  double deriv(double x) const;

  bool differentiable() const { return kind != KernelKind::UnitStep; }
};

/// Validates the margin (hinge requires margin >= 0; ignored otherwise).
Kernel make_kernel(KernelKind kind, double margin = 0.0);

/// Numeric check of the comparison-kernel conditions: differentiable almost
/// everywhere, monotone on [-50, 50], vanishing on the left, phi(0) within
/// [0.5, 1], and phi(50) >= 1 (to 1e-9).
struct AdmissibilityReport {
  bool differentiable_ae = false;
  bool monotone = false;
  bool vanishes_left = false;
  bool origin_in_band = false;
  bool reaches_one = false;

  bool admissible() const {
    return differentiable_ae && monotone && vanishes_left && origin_in_band &&
           reaches_one;
  }
};

AdmissibilityReport is_admissible(const Kernel& k);

/// Config-facing names: "unit_step" | "hinge" | "sigmoid" | "exponential" |
/// "softplus".
KernelKind parse_kernel_kind(std::string_view name);
std::string_view kernel_kind_name(KernelKind kind);

}  // namespace croloss
