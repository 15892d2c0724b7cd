#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace croloss {

using ItemId = std::int64_t;

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

/// Two dense layers with a rectified-linear hidden activation and identity
/// output.
struct Mlp {
  DenseLayer hidden;
  DenseLayer output;
};

struct ModelConfig {
  std::int64_t catalog = 0;
  int embedding_dim = 32;
  int hidden_dim = 32;
  int output_dim = 32;
  double tau = 10.0;
  std::uint64_t seed = 1;
};

/// Two-tower retrieval model over an id-only catalog. Behavior items and
/// target items share one embedding table; the towers differ only in their
/// MLP weights. Scores are scaled cosine similarities, so output norms are
/// irrelevant.
struct TwoTowerModel {
  std::int64_t catalog = 0;
  int d_e = 32;
  int d_h = 32;
  int d_out = 32;
  double tau = 10.0;
  std::vector<double> item_embeddings;  // catalog x d_e
  Mlp user_mlp;
  Mlp item_mlp;

  std::span<const double> embedding_row(ItemId id) const {
    return std::span<const double>(item_embeddings)
        .subspan(static_cast<std::size_t>(id) * d_e, d_e);
  }
};

/// Embeddings are N(0, 0.01); layer weights are uniform scaled by the
/// inverse square root of fan-in; biases start at zero.
TwoTowerModel init_model(const ModelConfig& cfg);

struct TowerCache {
  std::vector<double> input;       // pooled behavior (user) or embedding row (item)
  std::vector<double> hidden_pre;  // pre-activation
  std::vector<double> out;
};

struct UserCache {
  TowerCache tower;
  std::vector<ItemId> behavior;
};

struct ItemCache {
  TowerCache tower;
  ItemId id = -1;
};

/// Mean-pools the behavior embeddings and runs the user MLP. Throws on an
/// empty sequence or an out-of-range id.
UserCache user_forward(const TwoTowerModel& m, std::span<const ItemId> behavior_ids);

ItemCache item_forward(const TwoTowerModel& m, ItemId item_id);

/// tau * cosine(u, v). A zero-norm vector has its norm floored at 1e-12;
/// `degenerate`, when given, is set so callers can log the event.
double score(const TwoTowerModel& m, std::span<const double> u,
             std::span<const double> v, bool* degenerate = nullptr);

/// Gradient accumulator, shape-congruent with the model. Embedding rows
/// never touched by a batch stay exactly zero; `touched` lists the rows that
/// received gradient (duplicates allowed until finalize_touched).
struct ModelGradients {
  std::vector<double> item_embeddings;
  Mlp user_mlp;
  Mlp item_mlp;
  std::vector<ItemId> touched;
};

ModelGradients zero_gradients_like(const TwoTowerModel& m);

/// Sorts and dedupes the touched-row list.
void finalize_touched(ModelGradients& g);

/// d(score)/d(u) and d(score)/d(v) through the scaled cosine, accumulated
/// into du/dv.
void score_backward(const TwoTowerModel& m, std::span<const double> u,
                    std::span<const double> v, double upstream,
                    std::span<double> du, std::span<double> dv);

/// Tower backward passes: propagate an output-vector gradient down to the
/// MLP weights and the embedding rows.
void user_backward(const TwoTowerModel& m, const UserCache& cache,
                   std::span<const double> grad_out, ModelGradients& grads);
void item_backward(const TwoTowerModel& m, const ItemCache& cache,
                   std::span<const double> grad_out, ModelGradients& grads);

/// Checkpoint container (versioned, little-endian, layout documented in the
/// README). Round-trips bit-exactly.
void save_checkpoint(const TwoTowerModel& m, const std::filesystem::path& path);
TwoTowerModel load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over shapes and raw parameter bytes; used to assert read-only
/// evaluation.
std::uint64_t parameter_hash(const TwoTowerModel& m);

}  // namespace croloss
