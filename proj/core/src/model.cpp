#include "croloss/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace croloss {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr char kCheckpointMagic[8] = {'C', 'R', 'O', 'T', 'T', 'C', 'K', '1'};

DenseLayer make_layer(int in, int out, std::mt19937_64& rng) {
  DenseLayer layer;
  layer.in = in;
  layer.out = out;
  layer.w.resize(static_cast<std::size_t>(in) * out);
  layer.b.assign(out, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : layer.w) x = dist(rng);
  return layer;
}

// y = W x + b
void dense_forward(const DenseLayer& layer, std::span<const double> x,
                   std::vector<double>& y) {
  y.assign(layer.out, 0.0);
  for (int r = 0; r < layer.out; ++r) {
    const double* row = layer.w.data() + static_cast<std::size_t>(r) * layer.in;
    double acc = layer.b[r];
    for (int c = 0; c < layer.in; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// Accumulates dW, db and writes dx.
void dense_backward(const DenseLayer& layer, std::span<const double> x,
                    std::span<const double> dy, DenseLayer& grad,
                    std::vector<double>& dx) {
  dx.assign(layer.in, 0.0);
  for (int r = 0; r < layer.out; ++r) {
    const double g = dy[r];
    grad.b[r] += g;
    double* grow = grad.w.data() + static_cast<std::size_t>(r) * layer.in;
    const double* wrow = layer.w.data() + static_cast<std::size_t>(r) * layer.in;
    for (int c = 0; c < layer.in; ++c) {
      grow[c] += g * x[c];
      dx[c] += g * wrow[c];
    }
  }
}

TowerCache mlp_forward(const Mlp& mlp, std::vector<double> input) {
  TowerCache cache;
  cache.input = std::move(input);
  dense_forward(mlp.hidden, cache.input, cache.hidden_pre);
  std::vector<double> post(cache.hidden_pre.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    post[i] = std::max(cache.hidden_pre[i], 0.0);
  }
  dense_forward(mlp.output, post, cache.out);
  return cache;
}

// Returns the gradient with respect to the tower input.
std::vector<double> mlp_backward(const Mlp& mlp, const TowerCache& cache,
                                 std::span<const double> dout, Mlp& grads) {
  std::vector<double> post(cache.hidden_pre.size());
  for (std::size_t i = 0; i < post.size(); ++i) {
    post[i] = std::max(cache.hidden_pre[i], 0.0);
  }
  std::vector<double> dpost;
  dense_backward(mlp.output, post, dout, grads.output, dpost);
  for (std::size_t i = 0; i < dpost.size(); ++i) {
    if (cache.hidden_pre[i] <= 0.0) dpost[i] = 0.0;
  }
  std::vector<double> dinput;
  dense_backward(mlp.hidden, cache.input, dpost, grads.hidden, dinput);
  return dinput;
}

Mlp zero_mlp_like(const Mlp& mlp) {
  Mlp z;
  z.hidden.in = mlp.hidden.in;
  z.hidden.out = mlp.hidden.out;
  z.hidden.w.assign(mlp.hidden.w.size(), 0.0);
  z.hidden.b.assign(mlp.hidden.b.size(), 0.0);
  z.output.in = mlp.output.in;
  z.output.out = mlp.output.out;
  z.output.w.assign(mlp.output.w.size(), 0.0);
  z.output.b.assign(mlp.output.b.size(), 0.0);
  return z;
}

void check_item_id(const TwoTowerModel& m, ItemId id) {
  if (id < 0 || id >= m.catalog) {
    throw std::out_of_range("item id " + std::to_string(id) +
                            " outside catalog of size " +
                            std::to_string(m.catalog));
  }
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_array(std::ofstream& out, const std::vector<double>& v) {
  std::uint64_t n = v.size();
  write_pod(out, n);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
}

std::vector<double> read_array(std::ifstream& in) {
  std::uint64_t n = 0;
  read_pod(in, n);
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

TwoTowerModel init_model(const ModelConfig& cfg) {
  if (cfg.catalog < 1) throw std::invalid_argument("model catalog must be >= 1");
  if (cfg.embedding_dim < 1 || cfg.hidden_dim < 1 || cfg.output_dim < 1) {
    throw std::invalid_argument("model dimensions must be >= 1");
  }
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("tau must be > 0");

  TwoTowerModel m;
  m.catalog = cfg.catalog;
  m.d_e = cfg.embedding_dim;
  m.d_h = cfg.hidden_dim;
  m.d_out = cfg.output_dim;
  m.tau = cfg.tau;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> emb(0.0, 0.01);
  m.item_embeddings.resize(static_cast<std::size_t>(m.catalog) * m.d_e);
  for (double& x : m.item_embeddings) x = emb(rng);
  m.user_mlp.hidden = make_layer(m.d_e, m.d_h, rng);
  m.user_mlp.output = make_layer(m.d_h, m.d_out, rng);
  m.item_mlp.hidden = make_layer(m.d_e, m.d_h, rng);
  m.item_mlp.output = make_layer(m.d_h, m.d_out, rng);
  return m;
}

UserCache user_forward(const TwoTowerModel& m, std::span<const ItemId> behavior_ids) {
  if (behavior_ids.empty()) {
    throw std::invalid_argument("user behavior sequence must be nonempty");
  }
  std::vector<double> pooled(m.d_e, 0.0);
  for (ItemId id : behavior_ids) {
    check_item_id(m, id);
    auto row = m.embedding_row(id);
    for (int i = 0; i < m.d_e; ++i) pooled[i] += row[i];
  }
  const double inv = 1.0 / static_cast<double>(behavior_ids.size());
  for (double& x : pooled) x *= inv;

  UserCache cache;
  cache.behavior.assign(behavior_ids.begin(), behavior_ids.end());
  cache.tower = mlp_forward(m.user_mlp, std::move(pooled));
  return cache;
}

ItemCache item_forward(const TwoTowerModel& m, ItemId item_id) {
  check_item_id(m, item_id);
  auto row = m.embedding_row(item_id);
  ItemCache cache;
  cache.id = item_id;
  cache.tower = mlp_forward(m.item_mlp, std::vector<double>(row.begin(), row.end()));
  return cache;
}

double score(const TwoTowerModel& m, std::span<const double> u,
             std::span<const double> v, bool* degenerate) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  nu = std::sqrt(nu);
  nv = std::sqrt(nv);
  if (degenerate && (nu < kNormFloor || nv < kNormFloor)) *degenerate = true;
  nu = std::max(nu, kNormFloor);
  nv = std::max(nv, kNormFloor);
  // Rounding can push the quotient a ulp past +-1; keep |score| <= tau.
  const double cos = std::clamp(dot / (nu * nv), -1.0, 1.0);
  return m.tau * cos;
}

ModelGradients zero_gradients_like(const TwoTowerModel& m) {
  ModelGradients g;
  g.item_embeddings.assign(m.item_embeddings.size(), 0.0);
  g.user_mlp = zero_mlp_like(m.user_mlp);
  g.item_mlp = zero_mlp_like(m.item_mlp);
  return g;
}

void finalize_touched(ModelGradients& g) {
  std::sort(g.touched.begin(), g.touched.end());
  g.touched.erase(std::unique(g.touched.begin(), g.touched.end()),
                  g.touched.end());
}

void score_backward(const TwoTowerModel& m, std::span<const double> u,
                    std::span<const double> v, double upstream,
                    std::span<double> du, std::span<double> dv) {
  double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu2 += u[i] * u[i];
    nv2 += v[i] * v[i];
  }
  double nu = std::max(std::sqrt(nu2), kNormFloor);
  double nv = std::max(std::sqrt(nv2), kNormFloor);
  const double inv = 1.0 / (nu * nv);
  const double cos = dot * inv;
  const double g = upstream * m.tau;
  for (std::size_t i = 0; i < u.size(); ++i) {
    du[i] += g * (v[i] * inv - cos * u[i] / (nu * nu));
    dv[i] += g * (u[i] * inv - cos * v[i] / (nv * nv));
  }
}

void user_backward(const TwoTowerModel& m, const UserCache& cache,
                   std::span<const double> grad_out, ModelGradients& grads) {
  std::vector<double> dpooled =
      mlp_backward(m.user_mlp, cache.tower, grad_out, grads.user_mlp);
  const double inv = 1.0 / static_cast<double>(cache.behavior.size());
  for (ItemId id : cache.behavior) {
    double* row = grads.item_embeddings.data() + static_cast<std::size_t>(id) * m.d_e;
    for (int i = 0; i < m.d_e; ++i) row[i] += dpooled[i] * inv;
    grads.touched.push_back(id);
  }
}

void item_backward(const TwoTowerModel& m, const ItemCache& cache,
                   std::span<const double> grad_out, ModelGradients& grads) {
  std::vector<double> dinput =
      mlp_backward(m.item_mlp, cache.tower, grad_out, grads.item_mlp);
  double* row =
      grads.item_embeddings.data() + static_cast<std::size_t>(cache.id) * m.d_e;
  for (int i = 0; i < m.d_e; ++i) row[i] += dinput[i];
  grads.touched.push_back(cache.id);
}

void save_checkpoint(const TwoTowerModel& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint32_t version = 1;
  write_pod(out, version);
  write_pod(out, m.catalog);
  std::int32_t de = m.d_e, dh = m.d_h, dout = m.d_out;
  write_pod(out, de);
  write_pod(out, dh);
  write_pod(out, dout);
  write_pod(out, m.tau);
  write_array(out, m.item_embeddings);
  for (const Mlp* mlp : {&m.user_mlp, &m.item_mlp}) {
    write_array(out, mlp->hidden.w);
    write_array(out, mlp->hidden.b);
    write_array(out, mlp->output.w);
    write_array(out, mlp->output.b);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

TwoTowerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != 1) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version));
  }
  TwoTowerModel m;
  read_pod(in, m.catalog);
  std::int32_t de = 0, dh = 0, dout = 0;
  read_pod(in, de);
  read_pod(in, dh);
  read_pod(in, dout);
  m.d_e = de;
  m.d_h = dh;
  m.d_out = dout;
  read_pod(in, m.tau);
  m.item_embeddings = read_array(in);
  for (Mlp* mlp : {&m.user_mlp, &m.item_mlp}) {
    mlp->hidden.w = read_array(in);
    mlp->hidden.b = read_array(in);
    mlp->output.w = read_array(in);
    mlp->output.b = read_array(in);
    mlp->hidden.in = m.d_e;
    mlp->hidden.out = m.d_h;
    mlp->output.in = m.d_h;
    mlp->output.out = m.d_out;
  }
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  if (m.item_embeddings.size() !=
      static_cast<std::size_t>(m.catalog) * static_cast<std::size_t>(m.d_e)) {
    throw std::runtime_error("checkpoint shape mismatch: " + path.string());
  }
  return m;
}

std::uint64_t parameter_hash(const TwoTowerModel& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  mix_bytes(&m.catalog, sizeof(m.catalog));
  mix_bytes(&m.d_e, sizeof(m.d_e));
  mix_bytes(&m.d_h, sizeof(m.d_h));
  mix_bytes(&m.d_out, sizeof(m.d_out));
  mix_bytes(&m.tau, sizeof(m.tau));
  mix_bytes(m.item_embeddings.data(), m.item_embeddings.size() * sizeof(double));
  for (const Mlp* mlp : {&m.user_mlp, &m.item_mlp}) {
    mix_bytes(mlp->hidden.w.data(), mlp->hidden.w.size() * sizeof(double));
    mix_bytes(mlp->hidden.b.data(), mlp->hidden.b.size() * sizeof(double));
    mix_bytes(mlp->output.w.data(), mlp->output.w.size() * sizeof(double));
    mix_bytes(mlp->output.b.data(), mlp->output.b.size() * sizeof(double));
  }
  return h;
}

}  // namespace croloss
