#include <stdexcept>
#include <cmath>
#include <random>

#include "croloss/kernels.hpp"
#include "doctest.h"

using namespace croloss;

namespace {

double central_diff(const Kernel& k, double x, double h = 1e-5) {
  return (k.eval(x + h) - k.eval(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("kernel eval matches the defining formulas") {
  CHECK(make_kernel(KernelKind::Sigmoid).eval(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(make_kernel(KernelKind::Exponential).eval(0.0) == 1.0);
  CHECK(make_kernel(KernelKind::Hinge, 5.0).eval(-5.0) == 0.0);
  CHECK(make_kernel(KernelKind::Softplus).eval(0.0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const Kernel step = make_kernel(KernelKind::UnitStep);
  CHECK(step.eval(0.0) == 1.0);  // ties count against the positive
  CHECK(step.eval(-1e-300) == 0.0);
  CHECK(step.eval(3.0) == 1.0);
}

TEST_CASE("kernel derivatives") {
  CHECK(make_kernel(KernelKind::Sigmoid).deriv(0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(make_kernel(KernelKind::Softplus).deriv(0.0) == doctest::Approx(0.5).epsilon(1e-15));

  const Kernel hinge = make_kernel(KernelKind::Hinge, 5.0);
  // Finite-difference oracle first: the slope at 3.7 is exactly 1.
  CHECK(central_diff(hinge, 3.7) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hinge.deriv(3.7) == 1.0);
  CHECK(hinge.deriv(-5.0) == 1.0);  // right subgradient at the kink
  CHECK(hinge.deriv(-5.0 - 1e-12) == 0.0);

  CHECK_THROWS_AS(make_kernel(KernelKind::UnitStep).deriv(0.0), std::invalid_argument);
}

TEST_CASE("kernel derivative matches central differences on [-20, 20]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> xs(-20.0, 20.0);
  for (KernelKind kind : {KernelKind::Hinge, KernelKind::Sigmoid,
                          KernelKind::Exponential, KernelKind::Softplus}) {
    const Kernel k = make_kernel(kind, 5.0);
    for (int i = 0; i < 300; ++i) {
      double x = xs(rng);
      if (kind == KernelKind::Hinge && std::abs(x + k.margin) < 1e-3) continue;
      const double an = k.deriv(x);
      const double rel = std::abs(an - central_diff(k, x)) / std::max(1.0, std::abs(an));
      CHECK(rel < 1e-5);
    }
  }
}

TEST_CASE("kernels are monotone") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xs(-40.0, 40.0);
  for (KernelKind kind : {KernelKind::UnitStep, KernelKind::Hinge, KernelKind::Sigmoid,
                          KernelKind::Exponential, KernelKind::Softplus}) {
    const Kernel k = make_kernel(kind, 2.0);
    for (int i = 0; i < 500; ++i) {
      double a = xs(rng), b = xs(rng);
      if (a > b) std::swap(a, b);
      CHECK(k.eval(a) <= k.eval(b));
    }
  }
}

TEST_CASE("sigmoid and softplus stay finite far outside the scorer range") {
  const Kernel sig = make_kernel(KernelKind::Sigmoid);
  const Kernel sp = make_kernel(KernelKind::Softplus);
  for (double x : {-1e4, -500.0, -31.0, 31.0, 500.0, 1e4}) {
    CHECK(std::isfinite(sig.eval(x)));
    CHECK(std::isfinite(sig.deriv(x)));
    CHECK(std::isfinite(sp.eval(x)));
    CHECK(std::isfinite(sp.deriv(x)));
  }
  CHECK(sp.eval(1000.0) == 1000.0);
  CHECK(sig.eval(1000.0) == 1.0);
}

TEST_CASE("admissibility screens") {
  CHECK(is_admissible(make_kernel(KernelKind::Sigmoid)).admissible());
  CHECK(is_admissible(make_kernel(KernelKind::Softplus)).admissible());
  CHECK(is_admissible(make_kernel(KernelKind::UnitStep)).admissible());

  // Exponential sits exactly on the phi(0) = 1 boundary.
  const AdmissibilityReport exp_report = is_admissible(make_kernel(KernelKind::Exponential));
  CHECK(exp_report.admissible());
  CHECK(exp_report.origin_in_band);

  // A small hinge margin fails the phi(0) band from below, a large one from
  // above; a mid-range margin passes.
  const AdmissibilityReport low = is_admissible(make_kernel(KernelKind::Hinge, 0.3));
  CHECK_FALSE(low.origin_in_band);
  CHECK(low.monotone);
  CHECK(low.vanishes_left);
  CHECK_FALSE(low.admissible());
  CHECK(is_admissible(make_kernel(KernelKind::Hinge, 0.8)).admissible());
  CHECK_FALSE(is_admissible(make_kernel(KernelKind::Hinge, 5.0)).origin_in_band);
}

TEST_CASE("kernel construction and names") {
  CHECK_THROWS_AS(make_kernel(KernelKind::Hinge, -1.0), std::invalid_argument);
  for (KernelKind kind : {KernelKind::UnitStep, KernelKind::Hinge, KernelKind::Sigmoid,
                          KernelKind::Exponential, KernelKind::Softplus}) {
    CHECK(parse_kernel_kind(kernel_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_kernel_kind("relu"), std::invalid_argument);
  CHECK_FALSE(make_kernel(KernelKind::UnitStep).differentiable());
  CHECK(make_kernel(KernelKind::Hinge, 1.0).differentiable());
}
