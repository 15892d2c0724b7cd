#include "croloss/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace croloss {

namespace {

// Reads a whole file, transparently inflating gzip (sniffed from the
// 1f 8b magic bytes).
std::string read_possibly_gzipped(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) {
    throw std::runtime_error("cannot open dataset: " + path.string());
  }
  unsigned char magic[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(magic), 2);
  probe.close();

  if (magic[0] == 0x1f && magic[1] == 0x8b) {
    gzFile gz = gzopen(path.string().c_str(), "rb");
    if (!gz) throw std::runtime_error("cannot open gzip dataset: " + path.string());
    std::string content;
    char buf[1 << 16];
    int n;
    while ((n = gzread(gz, buf, sizeof(buf))) > 0) {
      content.append(buf, static_cast<std::size_t>(n));
    }
    bool ok = n == 0;
    gzclose(gz);
    if (!ok) throw std::runtime_error("gzip read failed: " + path.string());
    return content;
  }

  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && !s.empty();
}

struct RawEvent {
  std::int64_t user;
  std::int64_t item;
  std::int64_t ts;
  std::size_t file_order;
};

}  // namespace

BehaviorLog ingest(const std::filesystem::path& path, const IngestOptions& options) {
  const std::string content = read_possibly_gzipped(path);

  BehaviorLog log;
  std::unordered_map<std::string, std::int64_t> user_index;
  std::unordered_map<std::string, std::int64_t> item_index;
  std::vector<RawEvent> raw;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool saw_data = false;
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::size_t d1 = line.find(options.delimiter);
    std::size_t d2 = d1 == std::string_view::npos
                         ? std::string_view::npos
                         : line.find(options.delimiter, d1 + 1);
    std::string_view user_field, item_field, ts_field;
    std::int64_t ts = 0;
    bool ok = d1 != std::string_view::npos && d2 != std::string_view::npos;
    if (ok) {
      user_field = line.substr(0, d1);
      item_field = line.substr(d1 + 1, d2 - d1 - 1);
      ts_field = line.substr(d2 + 1);
      ok = !user_field.empty() && !item_field.empty() && parse_int(ts_field, ts);
    }
    if (!ok) {
      // A single non-conforming first line is treated as a header.
      if (line_no == 1 && !saw_data) continue;
      throw std::runtime_error("malformed dataset line " + std::to_string(line_no) +
                               " in " + path.string());
    }
    saw_data = true;

    auto intern = [](std::unordered_map<std::string, std::int64_t>& index,
                     std::vector<std::string>& names, std::string_view key) {
      auto [it, inserted] =
          index.try_emplace(std::string(key), static_cast<std::int64_t>(names.size()));
      if (inserted) names.emplace_back(key);
      return it->second;
    };
    RawEvent e;
    e.user = intern(user_index, log.user_names, user_field);
    e.item = intern(item_index, log.item_names, item_field);
    e.ts = ts;
    e.file_order = raw.size();
    raw.push_back(e);
  }

  if (raw.empty()) {
    throw std::runtime_error("dataset has no events: " + path.string());
  }

  std::stable_sort(raw.begin(), raw.end(), [](const RawEvent& a, const RawEvent& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.file_order < b.file_order;
  });

  log.events.reserve(raw.size());
  log.user_offsets.assign(log.user_names.size() + 1, 0);
  for (const RawEvent& e : raw) {
    log.events.push_back(Event{e.user, e.item, e.ts});
    ++log.user_offsets[e.user + 1];
  }
  std::partial_sum(log.user_offsets.begin(), log.user_offsets.end(),
                   log.user_offsets.begin());
  return log;
}

UserSplit split_users(const BehaviorLog& log, std::array<int, 3> ratios,
                      std::uint64_t seed) {
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0) {
    throw std::invalid_argument("split ratios must be positive");
  }
  const std::int64_t n = log.num_users();
  if (n < 3) {
    throw std::invalid_argument("need at least 3 users to split");
  }
  std::vector<UserId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  const std::int64_t total = ratios[0] + ratios[1] + ratios[2];
  const std::int64_t c1 = n * ratios[0] / total;
  const std::int64_t c2 = n * (ratios[0] + ratios[1]) / total;

  UserSplit split;
  split.train.assign(ids.begin(), ids.begin() + c1);
  split.validation.assign(ids.begin() + c1, ids.begin() + c2);
  split.test.assign(ids.begin() + c2, ids.end());
  return split;
}

std::vector<TrainingSample> make_samples(const BehaviorLog& log,
                                         std::span<const UserId> users,
                                         int max_len, EvalTargets targets) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  std::vector<TrainingSample> samples;
  for (UserId u : users) {
    auto events = log.user_events(u);
    const std::size_t len = events.size();
    if (len < 2) continue;
    const std::size_t first_target = targets == EvalTargets::Last ? len - 1 : 1;
    for (std::size_t t = first_target; t < len; ++t) {
      TrainingSample s;
      const std::size_t start = t > static_cast<std::size_t>(max_len)
                                    ? t - static_cast<std::size_t>(max_len)
                                    : 0;
      s.history.reserve(t - start);
      for (std::size_t i = start; i < t; ++i) s.history.push_back(events[i].item);
      s.target = events[t].item;
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

BatchStream::BatchStream(const std::vector<TrainingSample>& samples, int n_bs,
                         int n_rn, std::int64_t catalog, std::uint64_t seed)
    : samples_(samples), n_bs_(n_bs), n_rn_(n_rn), catalog_(catalog), seed_(seed) {
  if (n_bs < 1 || n_rn < 1) {
    throw std::invalid_argument("batch size and negatives-per-positive must be >= 1");
  }
  if (static_cast<std::int64_t>(n_bs) * n_rn + 1 > catalog) {
    throw std::invalid_argument(
        "shared negative pool (n_rn * n_bs) must stay below the catalog size");
  }
  order_.resize(samples.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  start_epoch(0);
}

void BatchStream::start_epoch(std::int64_t epoch) {
  // Mix the epoch into the seed so every epoch sees a fresh deterministic
  // shuffle and negative draw.
  rng_.seed(seed_ + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1));
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

bool BatchStream::next(Batch& out) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t take = std::min(static_cast<std::size_t>(n_bs_),
                                    order_.size() - cursor_);
  out.index = batch_counter_++;
  out.sample_indices.assign(order_.begin() + cursor_,
                            order_.begin() + cursor_ + take);
  cursor_ += take;

  std::uniform_int_distribution<std::int64_t> pick(0, catalog_ - 1);
  out.shared_negatives.resize(static_cast<std::size_t>(n_rn_) * take);
  for (ItemId& id : out.shared_negatives) id = pick(rng_);
  return true;
}

std::int64_t BatchStream::batches_per_epoch() const {
  return static_cast<std::int64_t>(
      (samples_.size() + static_cast<std::size_t>(n_bs_) - 1) /
      static_cast<std::size_t>(n_bs_));
}

}  // namespace croloss
