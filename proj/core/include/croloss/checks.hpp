#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace croloss {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // worst relative error / deviation seen
  std::string detail;
};

struct GradcheckOptions {
  std::uint64_t seed = 1771;
  bool quick = false;
  // Test hook: scales the analytic kernel derivative inside the battery so
  // the detector itself can be exercised. 1.0 means no corruption.
  double kernel_deriv_scale = 1.0;
};

/// Kernel derivatives against central differences (and the admissibility
/// screens of the standard kernels).
std::vector<CheckResult> run_kernel_derivative_checks(const GradcheckOptions& opt);

/// Analytic loss gradients against finite differences over a family/kernel/
/// alpha grid, in both full-catalog and sampled-scale regimes. The lambda
/// family is checked with its density multiplier frozen.
std::vector<CheckResult> run_loss_gradient_checks(const GradcheckOptions& opt);

/// Closed-form equivalences: exponential/alpha=1 against softmax CE,
/// hinge/alpha=0 against triplet, softplus/alpha=0 against BPR.
std::vector<CheckResult> run_special_case_checks(const GradcheckOptions& opt);

/// End-to-end gradients of the tiny two-tower model (catalog 30, width 4)
/// for every loss family.
std::vector<CheckResult> run_model_gradient_checks(const GradcheckOptions& opt);

std::vector<CheckResult> run_full_battery(const GradcheckOptions& opt);

}  // namespace croloss
