#include "croloss/checks.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "croloss/eval.hpp"
#include "croloss/losses.hpp"
#include "croloss/model.hpp"
#include "croloss/pipeline.hpp"

namespace croloss {

namespace {

std::string format_worst(double worst) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << worst;
  return os.str();
}

CheckResult make_result(std::string name, bool pass, double worst,
                        std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.pass = pass;
  r.worst = worst;
  if (!pass && detail.empty()) detail = "worst deviation " + format_worst(worst);
  r.detail = std::move(detail);
  return r;
}

// Random gap batches that stay inside the smooth region of the weighting
// support for the given kernel, so finite differences see the same branch
// as the analytic gradient.
std::vector<GapVector> draw_interior_gaps(std::mt19937_64& rng, const Kernel& k,
                                          std::int64_t catalog, int positives,
                                          int gaps_per_positive, double scale,
                                          double mean) {
  std::normal_distribution<double> gap(mean, 1.5);
  std::vector<GapVector> batch(positives);
  for (GapVector& gv : batch) {
    gv.sample_scale = scale;
    for (int attempt = 0; attempt < 200; ++attempt) {
      gv.gaps.clear();
      for (int i = 0; i < gaps_per_positive; ++i) {
        double g = std::clamp(gap(rng), -8.0, 8.0);
        if (k.kind == KernelKind::Hinge && std::abs(g + k.margin) < 2e-3) {
          g += 5e-3;
        }
        gv.gaps.push_back(g);
      }
      const double rhat = rank_smooth(gv, k);
      if (rhat < 0.9 * (static_cast<double>(catalog) + 1.0)) break;
    }
  }
  return batch;
}

std::vector<double> flatten_gaps(const std::vector<GapVector>& batch) {
  std::vector<double> flat;
  for (const GapVector& gv : batch) {
    flat.insert(flat.end(), gv.gaps.begin(), gv.gaps.end());
  }
  return flat;
}

std::vector<GapVector> unflatten_gaps(const std::vector<GapVector>& shape,
                                      std::span<const double> flat) {
  std::vector<GapVector> batch = shape;
  std::size_t pos = 0;
  for (GapVector& gv : batch) {
    for (double& g : gv.gaps) g = flat[pos++];
  }
  return batch;
}

std::vector<double> flatten_neg_grads(const LossOutput& out) {
  std::vector<double> flat;
  for (const auto& per_positive : out.grad_neg) {
    flat.insert(flat.end(), per_positive.begin(), per_positive.end());
  }
  return flat;
}

struct LossGridEntry {
  std::string name;
  LossSpec spec;
  double gap_mean;  // convex kernels want mostly negative gaps
};

std::vector<LossGridEntry> loss_grid(std::int64_t catalog) {
  std::vector<LossGridEntry> grid;
  auto weighted = [catalog](LossSpec spec, double alpha) {
    spec.weighting = Weighting(alpha, catalog);
    return spec;
  };
  const struct {
    KernelKind kind;
    double margin;
    double mean;
  } kernels[] = {
      {KernelKind::Hinge, 5.0, -2.0},
      {KernelKind::Sigmoid, 0.0, 0.0},
      {KernelKind::Exponential, 0.0, -2.0},
      {KernelKind::Softplus, 0.0, -1.0},
  };
  for (const auto& k : kernels) {
    for (double alpha : {0.0, 0.6, 1.0, 1.4}) {
      LossSpec spec;
      spec.family = LossFamily::CROLoss;
      spec.kernel = make_kernel(k.kind, k.margin);
      std::ostringstream name;
      name << "loss_grad/croloss/" << kernel_kind_name(k.kind) << "/alpha="
           << alpha;
      grid.push_back({name.str(), weighted(spec, alpha), k.mean});
    }
  }
  const struct {
    KernelKind k1;
    KernelKind k2;
  } lambda_pairs[] = {
      {KernelKind::UnitStep, KernelKind::Softplus},
      {KernelKind::Sigmoid, KernelKind::Exponential},
      {KernelKind::Sigmoid, KernelKind::Softplus},
  };
  for (const auto& pair : lambda_pairs) {
    for (double alpha : {0.0, 1.0, 1.4}) {
      LossSpec spec;
      spec.family = LossFamily::CROLossLambda;
      spec.kernel1 = make_kernel(pair.k1);
      spec.kernel2 = make_kernel(pair.k2);
      std::ostringstream name;
      name << "loss_grad/croloss_lambda/" << kernel_kind_name(pair.k1) << "+"
           << kernel_kind_name(pair.k2) << "/alpha=" << alpha;
      grid.push_back({name.str(),
                      weighted(spec, alpha),
                      pair.k2 == KernelKind::Exponential ? -2.0 : -1.0});
    }
  }
  {
    LossSpec spec;
    spec.family = LossFamily::SoftmaxCE;
    grid.push_back({"loss_grad/softmax_ce", spec, 0.0});
  }
  {
    LossSpec spec;
    spec.family = LossFamily::Triplet;
    spec.margin = 5.0;
    grid.push_back({"loss_grad/triplet", spec, -2.0});
  }
  {
    LossSpec spec;
    spec.family = LossFamily::BPR;
    grid.push_back({"loss_grad/bpr", spec, 0.0});
  }
  return grid;
}

// Frozen-multiplier scalar for the lambda family: lambda comes from the base
// point and stays constant while finite differences move the gaps.
double lambda_frozen_value(const LossSpec& spec,
                           const std::vector<GapVector>& batch,
                           std::span<const double> frozen_lambda) {
  double value = 0.0;
  for (std::size_t p = 0; p < batch.size(); ++p) {
    value += frozen_lambda[p] * rank_smooth(batch[p], spec.kernel2);
  }
  return value;
}

std::vector<double> frozen_lambdas(const LossSpec& spec,
                                   const std::vector<GapVector>& batch) {
  const Weighting& w = spec.weighting.value();
  const double cap =
      std::nextafter(static_cast<double>(w.catalog_size()) + 1.0, 0.0);
  std::vector<double> lambdas;
  lambdas.reserve(batch.size());
  for (const GapVector& gv : batch) {
    lambdas.push_back(w.density(std::min(rank_smooth(gv, spec.kernel1), cap)));
  }
  return lambdas;
}

struct TinyBatchSetup {
  TwoTowerModel model;
  Batch batch;
  std::vector<TrainingSample> samples;
};

TinyBatchSetup make_tiny_setup(std::uint64_t seed) {
  TinyBatchSetup setup;
  ModelConfig mc;
  mc.catalog = 30;
  mc.embedding_dim = 4;
  mc.hidden_dim = 4;
  mc.output_dim = 4;
  mc.tau = 2.0;
  mc.seed = seed;
  setup.model = init_model(mc);

  std::mt19937_64 rng(seed ^ 0xABCDEF);

  // Move the parameter point away from the fresh-init regime: with tiny
  // embeddings and zero biases every hidden pre-activation hugs the relu
  // kink, which finite differences then straddle. Scale the embeddings up
  // and randomize the biases so the check runs at a generic smooth point.
  for (double& x : setup.model.item_embeddings) x *= 50.0;
  std::uniform_real_distribution<double> bias(-0.3, 0.3);
  for (Mlp* mlp : {&setup.model.user_mlp, &setup.model.item_mlp}) {
    for (double& b : mlp->hidden.b) b = bias(rng);
    for (double& b : mlp->output.b) b = bias(rng);
  }
  std::uniform_int_distribution<std::int64_t> item(0, mc.catalog - 1);
  std::uniform_int_distribution<int> hist_len(1, 5);
  for (int s = 0; s < 6; ++s) {
    TrainingSample sample;
    const int len = hist_len(rng);
    for (int i = 0; i < len; ++i) sample.history.push_back(item(rng));
    sample.target = item(rng);
    setup.samples.push_back(std::move(sample));
    setup.batch.sample_indices.push_back(s);
  }
  for (int j = 0; j < 18; ++j) setup.batch.shared_negatives.push_back(item(rng));
  return setup;
}

// Every trainable parameter as one flat vector (embeddings first).
std::vector<double> flatten_parameters(const TwoTowerModel& m) {
  std::vector<double> flat = m.item_embeddings;
  for (const Mlp* mlp : {&m.user_mlp, &m.item_mlp}) {
    flat.insert(flat.end(), mlp->hidden.w.begin(), mlp->hidden.w.end());
    flat.insert(flat.end(), mlp->hidden.b.begin(), mlp->hidden.b.end());
    flat.insert(flat.end(), mlp->output.w.begin(), mlp->output.w.end());
    flat.insert(flat.end(), mlp->output.b.begin(), mlp->output.b.end());
  }
  return flat;
}

void unflatten_parameters(TwoTowerModel& m, std::span<const double> flat) {
  std::size_t pos = 0;
  auto take = [&](std::vector<double>& dst) {
    std::copy(flat.begin() + pos, flat.begin() + pos + dst.size(), dst.begin());
    pos += dst.size();
  };
  take(m.item_embeddings);
  for (Mlp* mlp : {&m.user_mlp, &m.item_mlp}) {
    take(mlp->hidden.w);
    take(mlp->hidden.b);
    take(mlp->output.w);
    take(mlp->output.b);
  }
}

std::vector<double> flatten_gradients(const ModelGradients& g) {
  std::vector<double> flat = g.item_embeddings;
  for (const Mlp* mlp : {&g.user_mlp, &g.item_mlp}) {
    flat.insert(flat.end(), mlp->hidden.w.begin(), mlp->hidden.w.end());
    flat.insert(flat.end(), mlp->hidden.b.begin(), mlp->hidden.b.end());
    flat.insert(flat.end(), mlp->output.w.begin(), mlp->output.w.end());
    flat.insert(flat.end(), mlp->output.b.begin(), mlp->output.b.end());
  }
  return flat;
}

}  // namespace

std::vector<CheckResult> run_kernel_derivative_checks(const GradcheckOptions& opt) {
  std::vector<CheckResult> results;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> x_dist(-20.0, 20.0);
  const int points = opt.quick ? 50 : 400;

  const Kernel kernels[] = {
      make_kernel(KernelKind::Hinge, 5.0),
      make_kernel(KernelKind::Sigmoid),
      make_kernel(KernelKind::Exponential),
      make_kernel(KernelKind::Softplus),
  };
  for (const Kernel& k : kernels) {
    double worst = 0.0;
    const double h = 1e-5;
    for (int i = 0; i < points; ++i) {
      double x = x_dist(rng);
      if (k.kind == KernelKind::Hinge && std::abs(x + k.margin) < 1e-3) {
        x += 2e-3;
      }
      const double fd = (k.eval(x + h) - k.eval(x - h)) / (2.0 * h);
      const double an = k.deriv(x) * opt.kernel_deriv_scale;
      const double rel = std::abs(fd - an) / std::max(1.0, std::abs(an));
      worst = std::max(worst, rel);
    }
    results.push_back(make_result(
        std::string("kernel_derivative/") + std::string(kernel_kind_name(k.kind)),
        worst < 1e-5, worst));
  }

  const Kernel screened[] = {
      make_kernel(KernelKind::UnitStep),
      make_kernel(KernelKind::Hinge, 0.8),
      make_kernel(KernelKind::Sigmoid),
      make_kernel(KernelKind::Exponential),
      make_kernel(KernelKind::Softplus),
  };
  for (const Kernel& k : screened) {
    const AdmissibilityReport report = is_admissible(k);
    results.push_back(make_result(
        std::string("kernel_admissible/") + std::string(kernel_kind_name(k.kind)),
        report.admissible(), report.admissible() ? 0.0 : 1.0));
  }
  return results;
}

std::vector<CheckResult> run_loss_gradient_checks(const GradcheckOptions& opt) {
  std::vector<CheckResult> results;
  std::mt19937_64 rng(opt.seed + 1);
  const int instances = opt.quick ? 10 : 100;

  struct Regime {
    std::int64_t catalog;
    double scale;
    const char* label;
  };
  // Full-catalog (scale 1) and sampled (scale > 1) regimes. The catalog is
  // large enough that every kernel's smoothed rank stays interior.
  const Regime regimes[] = {
      {1 << 17, 1.0, "full"},
      {1 << 17, 4.0, "sampled"},
  };

  for (const Regime& regime : regimes) {
    for (const LossGridEntry& entry : loss_grid(regime.catalog)) {
      double worst = 0.0;
      std::size_t worst_coord = 0;
      for (int inst = 0; inst < instances; ++inst) {
        const Kernel interior_kernel =
            entry.spec.family == LossFamily::CROLoss ? entry.spec.kernel
            : entry.spec.family == LossFamily::CROLossLambda
                ? entry.spec.kernel2
            : entry.spec.family == LossFamily::Triplet
                ? make_kernel(KernelKind::Hinge, entry.spec.margin)
                : make_kernel(KernelKind::Sigmoid);
        std::vector<GapVector> batch =
            draw_interior_gaps(rng, interior_kernel, regime.catalog, 2, 8,
                               regime.scale, entry.gap_mean);

        const LossOutput out = loss_forward(entry.spec, batch);
        const std::vector<double> analytic = flatten_neg_grads(out);
        const std::vector<double> flat = flatten_gaps(batch);

        FiniteDiffResult fd;
        if (entry.spec.family == LossFamily::CROLossLambda) {
          const std::vector<double> lambdas = frozen_lambdas(entry.spec, batch);
          fd = finite_diff_check(
              [&](std::span<const double> x) {
                return lambda_frozen_value(entry.spec, unflatten_gaps(batch, x),
                                           lambdas);
              },
              flat, analytic);
        } else {
          fd = finite_diff_check(
              [&](std::span<const double> x) {
                return loss_forward(entry.spec, unflatten_gaps(batch, x)).value;
              },
              flat, analytic);
        }
        if (fd.max_rel_err > worst) {
          worst = fd.max_rel_err;
          worst_coord = fd.worst_index;
        }
      }
      std::ostringstream name;
      name << entry.name << "/" << regime.label;
      results.push_back(make_result(
          name.str(), worst < 1e-4, worst,
          worst < 1e-4 ? std::string()
                       : "worst coordinate " + std::to_string(worst_coord)));
    }
  }
  return results;
}

std::vector<CheckResult> run_special_case_checks(const GradcheckOptions& opt) {
  std::mt19937_64 rng(opt.seed + 2);
  std::uniform_real_distribution<double> score(-10.0, 10.0);
  std::uniform_int_distribution<int> pow2(10, 16);
  const int instances = opt.quick ? 20 : 200;
  constexpr int kPositives = 8;
  constexpr int kNegatives = 20;

  double worst_softmax = 0.0;
  bool triplet_exact = true;
  bool bpr_exact = true;
  double worst_triplet_value = 0.0;
  double worst_bpr_value = 0.0;

  for (int inst = 0; inst < instances; ++inst) {
    std::vector<GapVector> batch(kPositives);
    for (GapVector& gv : batch) {
      const double pos = score(rng);
      for (int i = 0; i < kNegatives; ++i) gv.gaps.push_back(score(rng) - pos);
    }

    {
      // Softmax equivalence: exponential kernel, alpha = 1. The catalog is
      // chosen far above any attainable smoothed rank so the weighting stays
      // in its smooth region where the closed forms coincide.
      const std::int64_t catalog = std::int64_t{1} << 30;
      LossSpec spec;
      spec.family = LossFamily::CROLoss;
      spec.kernel = make_kernel(KernelKind::Exponential);
      spec.weighting = Weighting(1.0, catalog);
      const LossOutput cro = croloss_forward(spec, batch);
      const LossOutput ce = softmax_ce(batch);
      const double z = std::log(static_cast<double>(catalog) + 1.0);

      auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
      };
      worst_softmax = std::max(worst_softmax, rel(cro.value * z, ce.value));
      for (int p = 0; p < kPositives; ++p) {
        worst_softmax =
            std::max(worst_softmax, rel(cro.grad_pos[p] * z, ce.grad_pos[p]));
        for (int i = 0; i < kNegatives; ++i) {
          worst_softmax = std::max(
              worst_softmax, rel(cro.grad_neg[p][i] * z, ce.grad_neg[p][i]));
        }
      }
    }

    {
      // Triplet and BPR equivalences at alpha = 0. Power-of-two catalogs make
      // the 1/catalog density scaling exact, so "x catalog" must round-trip
      // bitwise.
      const std::int64_t catalog = std::int64_t{1} << pow2(rng);
      const double n = static_cast<double>(catalog);

      LossSpec hinge_spec;
      hinge_spec.family = LossFamily::CROLoss;
      hinge_spec.kernel = make_kernel(KernelKind::Hinge, 5.0);
      hinge_spec.weighting = Weighting(0.0, catalog);
      const LossOutput cro_h = croloss_forward(hinge_spec, batch);
      const LossOutput tri = triplet(batch, 5.0);
      for (int p = 0; p < kPositives; ++p) {
        if (cro_h.grad_pos[p] * n != tri.grad_pos[p]) triplet_exact = false;
        for (int i = 0; i < kNegatives; ++i) {
          if (cro_h.grad_neg[p][i] * n != tri.grad_neg[p][i]) triplet_exact = false;
        }
      }
      worst_triplet_value = std::max(
          worst_triplet_value,
          std::abs(cro_h.value - tri.value / n) /
              std::max({1.0, std::abs(cro_h.value), std::abs(tri.value / n)}));

      LossSpec sp_spec;
      sp_spec.family = LossFamily::CROLoss;
      sp_spec.kernel = make_kernel(KernelKind::Softplus);
      sp_spec.weighting = Weighting(0.0, catalog);
      const LossOutput cro_s = croloss_forward(sp_spec, batch);
      const LossOutput b = bpr(batch);
      for (int p = 0; p < kPositives; ++p) {
        if (cro_s.grad_pos[p] * n != b.grad_pos[p]) bpr_exact = false;
        for (int i = 0; i < kNegatives; ++i) {
          if (cro_s.grad_neg[p][i] * n != b.grad_neg[p][i]) bpr_exact = false;
        }
      }
      worst_bpr_value = std::max(
          worst_bpr_value,
          std::abs(cro_s.value - b.value / n) /
              std::max({1.0, std::abs(cro_s.value), std::abs(b.value / n)}));
    }
  }

  std::vector<CheckResult> results;
  results.push_back(make_result("special_case/softmax_ce",
                                worst_softmax < 1e-10, worst_softmax));
  results.push_back(make_result(
      "special_case/triplet",
      triplet_exact && worst_triplet_value < 1e-12,
      triplet_exact ? worst_triplet_value : 1.0,
      triplet_exact ? std::string() : "gradient x catalog not bitwise equal"));
  results.push_back(make_result(
      "special_case/bpr", bpr_exact && worst_bpr_value < 1e-12,
      bpr_exact ? worst_bpr_value : 1.0,
      bpr_exact ? std::string() : "gradient x catalog not bitwise equal"));
  return results;
}

std::vector<CheckResult> run_model_gradient_checks(const GradcheckOptions& opt) {
  std::vector<CheckResult> results;

  struct Config {
    std::string name;
    LossSpec spec;
  };
  std::vector<Config> configs;
  {
    LossSpec spec;
    spec.family = LossFamily::CROLoss;
    spec.kernel = make_kernel(KernelKind::Sigmoid);
    spec.weighting = Weighting(1.0, 30);
    configs.push_back({"model_grad/croloss_sigmoid", spec});
  }
  if (!opt.quick) {
    {
      // Softplus exceeds 1, so give the weighting room to stay smooth.
      LossSpec spec;
      spec.family = LossFamily::CROLoss;
      spec.kernel = make_kernel(KernelKind::Softplus);
      spec.weighting = Weighting(1.0, 1 << 12);
      configs.push_back({"model_grad/croloss_softplus", spec});
    }
    {
      LossSpec spec;
      spec.family = LossFamily::CROLossLambda;
      spec.kernel1 = make_kernel(KernelKind::Sigmoid);
      spec.kernel2 = make_kernel(KernelKind::Softplus);
      spec.weighting = Weighting(1.0, 30);
      configs.push_back({"model_grad/croloss_lambda", spec});
    }
    {
      LossSpec spec;
      spec.family = LossFamily::SoftmaxCE;
      configs.push_back({"model_grad/softmax_ce", spec});
    }
    {
      LossSpec spec;
      spec.family = LossFamily::Triplet;
      spec.margin = 5.0;
      configs.push_back({"model_grad/triplet", spec});
    }
    {
      LossSpec spec;
      spec.family = LossFamily::BPR;
      configs.push_back({"model_grad/bpr", spec});
    }
  }

  const int draws = opt.quick ? 1 : 3;
  for (const Config& config : configs) {
    double worst = 0.0;
    for (int draw = 0; draw < draws; ++draw) {
      TinyBatchSetup setup = make_tiny_setup(opt.seed + 10 * draw + 3);

      const bool lambda = config.spec.family == LossFamily::CROLossLambda;
      std::vector<double> lambdas;
      if (lambda) {
        const ScoredBatch base =
            score_batch(setup.model, setup.batch, setup.samples);
        lambdas = frozen_lambdas(config.spec, base.gaps);
      }

      auto value_at = [&](std::span<const double> flat) {
        TwoTowerModel m = setup.model;
        unflatten_parameters(m, flat);
        const ScoredBatch scored = score_batch(m, setup.batch, setup.samples);
        if (lambda) return lambda_frozen_value(config.spec, scored.gaps, lambdas);
        return loss_forward(config.spec, scored.gaps).value;
      };

      const ScoredBatch scored =
          score_batch(setup.model, setup.batch, setup.samples);
      const LossOutput out = loss_forward(config.spec, scored.gaps);
      const ModelGradients grads =
          batch_backward(setup.model, scored, out, 1.0);

      const std::vector<double> flat = flatten_parameters(setup.model);
      const std::vector<double> analytic = flatten_gradients(grads);
      const FiniteDiffResult fd = finite_diff_check(value_at, flat, analytic);
      worst = std::max(worst, fd.max_rel_err);
    }
    results.push_back(make_result(config.name, worst < 1e-5, worst));
  }
  return results;
}

std::vector<CheckResult> run_full_battery(const GradcheckOptions& opt) {
  std::vector<CheckResult> all;
  for (auto group : {run_kernel_derivative_checks, run_loss_gradient_checks,
                     run_special_case_checks, run_model_gradient_checks}) {
    std::vector<CheckResult> part = group(opt);
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

}  // namespace croloss
