#include "croloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "croloss/eval.hpp"
#include "croloss/numeric.hpp"
#include "croloss/pipeline.hpp"

namespace croloss {

namespace {

template <typename ModelLike, typename Fn>
void for_each_mlp_array(ModelLike& m, Fn&& fn) {
  fn("user_mlp.hidden.w", m.user_mlp.hidden.w);
  fn("user_mlp.hidden.b", m.user_mlp.hidden.b);
  fn("user_mlp.output.w", m.user_mlp.output.w);
  fn("user_mlp.output.b", m.user_mlp.output.b);
  fn("item_mlp.hidden.w", m.item_mlp.hidden.w);
  fn("item_mlp.hidden.b", m.item_mlp.hidden.b);
  fn("item_mlp.output.w", m.item_mlp.output.w);
  fn("item_mlp.output.b", m.item_mlp.output.b);
}

void assert_finite_gradients(ModelGradients& grads, int d_e,
                             std::int64_t batch_index) {
  auto fail = [batch_index](const std::string& block) {
    throw TrainingDiverged("non-finite gradient in block '" + block +
                           "' at batch " + std::to_string(batch_index));
  };
  for_each_mlp_array(grads, [&](const char* name, std::vector<double>& data) {
    for (double x : data) {
      if (!std::isfinite(x)) fail(name);
    }
  });
  for (ItemId row : grads.touched) {
    const double* p =
        grads.item_embeddings.data() + static_cast<std::size_t>(row) * d_e;
    for (int i = 0; i < d_e; ++i) {
      if (!std::isfinite(p[i])) {
        fail("item_embeddings[row " + std::to_string(row) + "]");
      }
    }
  }
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads,
               std::span<double> m, std::span<double> v, std::int64_t step,
               const AdamParams& p) {
  if (params.size() != grads.size() || params.size() != m.size() ||
      params.size() != v.size()) {
    throw std::invalid_argument("adam_step shape mismatch");
  }
  if (step < 1) throw std::invalid_argument("adam step count must be >= 1");
  const double bc1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) {
      throw std::invalid_argument("non-finite gradient in adam_step");
    }
    m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
    v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    params[i] -= p.lr * mhat / (std::sqrt(vhat) + p.eps);
  }
}

AdamState init_adam_state(const TwoTowerModel& model) {
  AdamState state;
  state.m = zero_gradients_like(model);
  state.v = zero_gradients_like(model);
  return state;
}

TrainResult train(const TwoTowerModel& init, BatchStream& stream,
                  std::span<const TrainingSample> train_samples,
                  std::span<const TrainingSample> validation_samples,
                  const TrainConfig& cfg) {
  validate_loss_spec(cfg.loss);
  if (stream.catalog() != init.catalog) {
    throw std::invalid_argument("batch stream and model disagree on catalog size");
  }
  if (cfg.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(cfg.adam.lr >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(cfg.adam.beta1 > 0.0 && cfg.adam.beta1 < 1.0) ||
      !(cfg.adam.beta2 > 0.0 && cfg.adam.beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in (0, 1)");
  }

  std::vector<int> eval_ns = cfg.eval_ns;
  if (std::find(eval_ns.begin(), eval_ns.end(), cfg.pivot_n) == eval_ns.end()) {
    eval_ns.push_back(cfg.pivot_n);
  }
  std::sort(eval_ns.begin(), eval_ns.end());

  TrainResult result;
  TwoTowerModel model = init;
  AdamState state = init_adam_state(model);

  TwoTowerModel best_model = model;
  double best_recall = -1.0;
  std::int64_t best_step = 0;
  int evals_since_improvement = 0;
  bool stop = false;

  std::int64_t step = 0;
  std::int64_t degenerate_total = 0;
  CompensatedSum loss_since_eval;
  std::int64_t batches_since_eval = 0;

  // Parameter and moment arrays are stable across the run; only the
  // per-batch gradient arrays change identity.
  std::vector<std::vector<double>*> param_arrays, m_arrays, v_arrays;
  for_each_mlp_array(model, [&](const char*, std::vector<double>& a) {
    param_arrays.push_back(&a);
  });
  for_each_mlp_array(state.m, [&](const char*, std::vector<double>& a) {
    m_arrays.push_back(&a);
  });
  for_each_mlp_array(state.v, [&](const char*, std::vector<double>& a) {
    v_arrays.push_back(&a);
  });

  auto evaluate = [&](std::int64_t epoch) {
    if (validation_samples.empty()) return;
    EvalReport report = recall_at_n(model, validation_samples, eval_ns);
    HistoryEntry entry;
    entry.step = step;
    entry.epoch = epoch;
    entry.loss = batches_since_eval > 0
                     ? loss_since_eval.value() / static_cast<double>(batches_since_eval)
                     : 0.0;
    entry.recall = report.recall_at;
    result.history.push_back(entry);
    loss_since_eval = CompensatedSum();
    batches_since_eval = 0;

    const double pivot = report.recall_at.at(cfg.pivot_n);
    if (pivot > best_recall) {
      best_recall = pivot;
      best_model = model;
      best_step = step;
      evals_since_improvement = 0;
    } else if (cfg.patience > 0 && ++evals_since_improvement >= cfg.patience) {
      stop = true;
    }
    if (cfg.verbose) {
      std::cerr << "step " << step << " epoch " << epoch << " loss " << entry.loss
                << " recall@" << cfg.pivot_n << " " << pivot << '\n';
    }
  };

  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    stream.start_epoch(epoch);
    Batch batch;
    while (stream.next(batch)) {
      ScoredBatch scored = score_batch(model, batch, train_samples);
      degenerate_total += static_cast<std::int64_t>(scored.degenerate_scores);
      const LossOutput out = loss_forward(cfg.loss, scored.gaps);
      if (!std::isfinite(out.value)) {
        throw TrainingDiverged("non-finite loss value at batch " +
                               std::to_string(batch.index));
      }
      const double npos = static_cast<double>(scored.users.size());
      ModelGradients grads = batch_backward(model, scored, out, 1.0 / npos);
      assert_finite_gradients(grads, model.d_e, batch.index);

      ++state.step;
      for (ItemId row : grads.touched) {
        const std::size_t offset = static_cast<std::size_t>(row) * model.d_e;
        adam_step(std::span(model.item_embeddings).subspan(offset, model.d_e),
                  std::span(grads.item_embeddings).subspan(offset, model.d_e),
                  std::span(state.m.item_embeddings).subspan(offset, model.d_e),
                  std::span(state.v.item_embeddings).subspan(offset, model.d_e),
                  state.step, cfg.adam);
      }
      std::vector<std::vector<double>*> grad_arrays;
      for_each_mlp_array(grads, [&](const char*, std::vector<double>& a) {
        grad_arrays.push_back(&a);
      });
      for (std::size_t b = 0; b < param_arrays.size(); ++b) {
        adam_step(*param_arrays[b], *grad_arrays[b], *m_arrays[b], *v_arrays[b],
                  state.step, cfg.adam);
      }

      ++step;
      loss_since_eval.add(out.value / npos);
      ++batches_since_eval;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        evaluate(epoch);
        if (stop) break;
      }
    }
    if (!stop && cfg.eval_every == 0) evaluate(epoch);
  }

  if (!validation_samples.empty() &&
      (result.history.empty() || result.history.back().step != step)) {
    evaluate(cfg.epochs - 1);
  }
  if (degenerate_total > 0 && cfg.verbose) {
    std::cerr << "warning: " << degenerate_total
              << " degenerate (zero-norm) scores were floored\n";
  }

  result.steps_run = step;
  if (best_recall >= 0.0) {
    result.model = std::move(best_model);
    result.best_step = best_step;
    result.best_recall = best_recall;
  } else {
    result.model = std::move(model);
    result.best_step = step;
    result.best_recall = 0.0;
  }
  return result;
}

}  // namespace croloss
