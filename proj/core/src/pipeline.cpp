#include "croloss/pipeline.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace croloss {

namespace {

std::vector<double> normalized(std::span<const double> v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  const double inv = 1.0 / std::max(std::sqrt(n2), 1e-12);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  // The inputs are unit vectors; keep the cosine inside [-1, 1] so scores
  // stay bounded by tau.
  return std::clamp(acc, -1.0, 1.0);
}

}  // namespace

ScoredBatch score_batch(const TwoTowerModel& m, const Batch& batch,
                        std::span<const TrainingSample> samples) {
  ScoredBatch out;
  const std::size_t n = batch.sample_indices.size();
  out.users.reserve(n);
  out.target_slot.reserve(n);
  out.negative_slots.resize(n);
  out.positive_scores.reserve(n);
  out.gaps.reserve(n);

  // Item towers run once per unique item, in first-appearance order:
  // targets first, then the shared negative pool.
  std::unordered_map<ItemId, std::size_t> slot_of;
  auto intern_item = [&](ItemId id) {
    auto it = slot_of.find(id);
    if (it != slot_of.end()) return it->second;
    const std::size_t slot = out.items.size();
    out.items.push_back(item_forward(m, id));
    slot_of.emplace(id, slot);
    return slot;
  };
  for (std::size_t s = 0; s < n; ++s) {
    out.target_slot.push_back(intern_item(samples[batch.sample_indices[s]].target));
  }
  std::vector<std::size_t> negative_slot(batch.shared_negatives.size());
  for (std::size_t j = 0; j < batch.shared_negatives.size(); ++j) {
    negative_slot[j] = intern_item(batch.shared_negatives[j]);
  }

  std::vector<std::vector<double>> item_unit;
  item_unit.reserve(out.items.size());
  for (const ItemCache& item : out.items) {
    double n2 = 0.0;
    for (double x : item.tower.out) n2 += x * x;
    if (std::sqrt(n2) < 1e-12) ++out.degenerate_scores;
    item_unit.push_back(normalized(item.tower.out));
  }

  for (std::size_t s = 0; s < n; ++s) {
    const TrainingSample& sample = samples[batch.sample_indices[s]];
    out.users.push_back(user_forward(m, sample.history));
    double n2 = 0.0;
    for (double x : out.users.back().tower.out) n2 += x * x;
    if (std::sqrt(n2) < 1e-12) ++out.degenerate_scores;
    const std::vector<double> user_unit = normalized(out.users.back().tower.out);

    const double pos = m.tau * dot(user_unit, item_unit[out.target_slot[s]]);
    out.positive_scores.push_back(pos);

    GapVector gv;
    gv.gaps.reserve(batch.shared_negatives.size());
    auto& kept = out.negative_slots[s];
    kept.reserve(batch.shared_negatives.size());
    for (std::size_t j = 0; j < batch.shared_negatives.size(); ++j) {
      if (batch.shared_negatives[j] == sample.target) continue;
      const std::size_t slot = negative_slot[j];
      gv.gaps.push_back(m.tau * dot(user_unit, item_unit[slot]) - pos);
      kept.push_back(slot);
    }
    gv.sample_scale = static_cast<double>(m.catalog) /
                      (1.0 + static_cast<double>(kept.size()));
    if (gv.sample_scale < 1.0) {
      throw std::invalid_argument(
          "sampled negative pool exceeds catalog; reduce n_rn or batch size");
    }
    out.gaps.push_back(std::move(gv));
  }
  return out;
}

ModelGradients batch_backward(const TwoTowerModel& m, const ScoredBatch& scored,
                              const LossOutput& loss, double grad_scale) {
  const std::size_t n = scored.users.size();
  if (loss.grad_pos.size() != n || loss.grad_neg.size() != n) {
    throw std::invalid_argument("loss gradients do not match the scored batch");
  }

  ModelGradients grads = zero_gradients_like(m);
  std::vector<std::vector<double>> ditem(scored.items.size(),
                                         std::vector<double>(m.d_out, 0.0));
  std::vector<double> duser(m.d_out);

  for (std::size_t s = 0; s < n; ++s) {
    std::fill(duser.begin(), duser.end(), 0.0);
    const auto& u = scored.users[s].tower.out;
    const auto& kept = scored.negative_slots[s];
    if (loss.grad_neg[s].size() != kept.size()) {
      throw std::invalid_argument("per-positive gradient length mismatch");
    }
    score_backward(m, u, scored.items[scored.target_slot[s]].tower.out,
                   loss.grad_pos[s] * grad_scale, duser,
                   ditem[scored.target_slot[s]]);
    for (std::size_t j = 0; j < kept.size(); ++j) {
      score_backward(m, u, scored.items[kept[j]].tower.out,
                     loss.grad_neg[s][j] * grad_scale, duser, ditem[kept[j]]);
    }
    user_backward(m, scored.users[s], duser, grads);
  }
  for (std::size_t i = 0; i < scored.items.size(); ++i) {
    item_backward(m, scored.items[i], ditem[i], grads);
  }
  finalize_touched(grads);
  return grads;
}

}  // namespace croloss
