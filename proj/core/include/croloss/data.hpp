#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "croloss/model.hpp"

namespace croloss {

using UserId = std::int64_t;

struct Event {
  UserId user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;
};

/// Ingested click log. Events are grouped by user and sorted by timestamp
/// (file order breaks ties); user/item ids are contiguous integers in
/// first-appearance order, with the original string ids kept for reporting.
struct BehaviorLog {
  std::vector<Event> events;              // grouped by user, time-sorted
  std::vector<std::size_t> user_offsets;  // num_users + 1 boundaries
  std::vector<std::string> user_names;
  std::vector<std::string> item_names;

  std::int64_t num_users() const {
    return static_cast<std::int64_t>(user_names.size());
  }
  std::int64_t num_items() const {
    return static_cast<std::int64_t>(item_names.size());
  }
  std::span<const Event> user_events(UserId u) const {
    return std::span<const Event>(events).subspan(
        user_offsets[u], user_offsets[u + 1] - user_offsets[u]);
  }
};

struct IngestOptions {
  char delimiter = '\t';
};

/// Reads `user <delim> item <delim> timestamp` lines (gzip accepted by
/// magic-byte sniffing, one optional header line). Malformed lines raise
/// with their line number.
BehaviorLog ingest(const std::filesystem::path& path,
                   const IngestOptions& options = {});

struct UserSplit {
  std::vector<UserId> train;
  std::vector<UserId> validation;
  std::vector<UserId> test;
};

/// Seeded shuffle of all users partitioned by ratio; the three sets are
/// disjoint and cover every user.
UserSplit split_users(const BehaviorLog& log, std::array<int, 3> ratios,
                      std::uint64_t seed);

struct TrainingSample {
  std::vector<ItemId> history;  // at most max_len most recent behaviors
  ItemId target = 0;
};

enum class EvalTargets { All, Last };

/// Next-item samples: each event after the first becomes a target whose
/// history is the (truncated) prefix before it. Users with fewer than two
/// events contribute nothing. `targets` restricts evaluation users to every
/// position or the final one.
std::vector<TrainingSample> make_samples(const BehaviorLog& log,
                                         std::span<const UserId> users,
                                         int max_len,
                                         EvalTargets targets = EvalTargets::All);

/// One training batch: sample indices plus the uniform negative pool shared
/// by every positive in the batch.
struct Batch {
  std::int64_t index = 0;
  std::vector<std::size_t> sample_indices;
  std::vector<ItemId> shared_negatives;  // n_rn * batch size, with replacement
};

/// Deterministic epoch-reshuffled batch stream. The same (seed, epoch)
/// always yields the same batches, independent of the loss consuming them.
class BatchStream {
 public:
  BatchStream(const std::vector<TrainingSample>& samples, int n_bs, int n_rn,
              std::int64_t catalog, std::uint64_t seed);

  void start_epoch(std::int64_t epoch);
  bool next(Batch& out);

  std::int64_t catalog() const { return catalog_; }
  std::int64_t batches_per_epoch() const;

 private:
  const std::vector<TrainingSample>& samples_;
  int n_bs_;
  int n_rn_;
  std::int64_t catalog_;
  std::uint64_t seed_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::int64_t batch_counter_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace croloss
