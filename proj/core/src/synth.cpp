#include "croloss/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace croloss {

BehaviorLog make_clustered_log(const SynthConfig& cfg) {
  if (cfg.users < 1 || cfg.items < 1 || cfg.clusters < 1) {
    throw std::invalid_argument("synthetic log needs users, items, clusters >= 1");
  }
  if (cfg.items % cfg.clusters != 0) {
    throw std::invalid_argument("items must divide evenly into clusters");
  }
  if (cfg.min_events < 2 || cfg.max_events < cfg.min_events) {
    throw std::invalid_argument("event range must satisfy 2 <= min <= max");
  }

  const std::int64_t per_cluster = cfg.items / cfg.clusters;

  // Within-cluster popularity: rank r gets weight (r+1)^-exponent. One
  // cumulative table serves every cluster.
  std::vector<double> cumulative(per_cluster);
  double total = 0.0;
  for (std::int64_t r = 0; r < per_cluster; ++r) {
    total += std::pow(static_cast<double>(r + 1), -cfg.popularity_exponent);
    cumulative[r] = total;
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> n_events(cfg.min_events, cfg.max_events);
  std::uniform_int_distribution<int> pick_cluster(0, cfg.clusters - 1);
  std::uniform_int_distribution<std::int64_t> pick_item(0, cfg.items - 1);

  BehaviorLog log;
  log.user_names.reserve(cfg.users);
  log.item_names.reserve(cfg.items);
  for (std::int64_t i = 0; i < cfg.items; ++i) {
    log.item_names.push_back("i" + std::to_string(i));
  }
  log.user_offsets.assign(cfg.users + 1, 0);

  for (std::int64_t u = 0; u < cfg.users; ++u) {
    log.user_names.push_back("u" + std::to_string(u));
    const int home = pick_cluster(rng);
    const int events = n_events(rng);
    for (int e = 0; e < events; ++e) {
      ItemId item;
      if (unit(rng) < cfg.in_cluster_prob) {
        const double x = unit(rng) * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), x);
        const std::int64_t rank = it - cumulative.begin();
        item = static_cast<std::int64_t>(home) * per_cluster + rank;
      } else {
        item = pick_item(rng);
      }
      log.events.push_back(Event{u, item, e});
    }
    log.user_offsets[u + 1] = log.events.size();
  }
  return log;
}

void write_tsv(const BehaviorLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
  for (const Event& e : log.events) {
    out << log.user_names[e.user] << '\t' << log.item_names[e.item] << '\t'
        << e.timestamp << '\n';
  }
  if (!out) throw std::runtime_error("dataset write failed: " + path.string());
}

}  // namespace croloss
