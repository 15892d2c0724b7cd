#pragma once

#include <cstdint>
#include <filesystem>

#include "croloss/data.hpp"

namespace croloss {

/// Clustered synthetic click log for experiments and tests. Items are split
/// into equal clusters; each user draws most events from one home cluster
/// with a within-cluster popularity skew, and the rest uniformly from the
/// whole catalog.
struct SynthConfig {
  std::int64_t users = 5000;
  std::int64_t items = 2000;
  int clusters = 20;
  int min_events = 6;
  int max_events = 18;
  double in_cluster_prob = 0.85;
  double popularity_exponent = 0.9;  // weight of rank r is (r+1)^-exponent
  std::uint64_t seed = 7;
};

BehaviorLog make_clustered_log(const SynthConfig& cfg);

/// Writes a log back out as tab-separated `user item timestamp` lines.
void write_tsv(const BehaviorLog& log, const std::filesystem::path& path);

}  // namespace croloss
