#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "croloss/checks.hpp"
#include "croloss/eval.hpp"
#include "croloss/synth.hpp"
#include "json.hpp"

namespace croloss::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct LoadedData {
  BehaviorLog log;
  UserSplit split;
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> validation;
  std::vector<TrainingSample> test;
};

LoadedData load_dataset(const RunConfig& cfg) {
  if (cfg.data_path.empty()) {
    throw ConfigError("data.path is not set");
  }
  if (!fs::exists(cfg.data_path)) {
    throw ConfigError("dataset does not exist: " + cfg.data_path);
  }
  LoadedData d;
  IngestOptions opt;
  opt.delimiter = delimiter_from_config(cfg);
  d.log = ingest(cfg.data_path, opt);
  d.split = split_users(d.log, split_ratios_from_config(cfg), cfg.data_seed);
  const EvalTargets mode =
      cfg.data_eval_targets == "last" ? EvalTargets::Last : EvalTargets::All;
  d.train = make_samples(d.log, d.split.train, cfg.data_max_len);
  d.validation = make_samples(d.log, d.split.validation, cfg.data_max_len, mode);
  d.test = make_samples(d.log, d.split.test, cfg.data_max_len, mode);
  return d;
}

std::string percent(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << fraction * 100.0;
  return os.str();
}

std::string render_report_table(const EvalReport& report) {
  std::ostringstream os;
  os << "N        Recall@N (%)\n";
  for (const auto& [n, recall] : report.recall_at) {
    os << std::left << std::setw(9) << n << percent(recall) << '\n';
  }
  os << "pairs: " << report.num_pairs << "  mode: " << report.mode
     << "  tie_policy: " << report.tie_policy
     << "  exclude_history: " << (report.exclude_history ? "true" : "false")
     << '\n';
  return os.str();
}

json report_to_json(const EvalReport& report) {
  json recall = json::object();
  for (const auto& [n, value] : report.recall_at) {
    recall[std::to_string(n)] = value;
  }
  return json{{"recall", recall},
              {"num_pairs", report.num_pairs},
              {"mode", report.mode},
              {"tie_policy", report.tie_policy},
              {"exclude_history", report.exclude_history}};
}

void write_history(const std::vector<HistoryEntry>& history, const fs::path& path) {
  std::ofstream out(path);
  for (const HistoryEntry& e : history) {
    json recall = json::object();
    for (const auto& [n, value] : e.recall) recall[std::to_string(n)] = value;
    json line{{"step", e.step},
              {"epoch", e.epoch},
              {"loss", e.loss},
              {"recall", recall}};
    out << line.dump() << '\n';
  }
}

struct CellResult {
  std::string kernel_label;
  double alpha = 0.0;
  bool ok = false;
  std::string error;
  std::map<int, double> recall;
};

// A sweep row is either a plain kernel name or lambda(k1,k2).
struct SweepRow {
  std::string label;
  bool is_lambda = false;
  std::string kernel;
  std::string kernel1, kernel2;
};

SweepRow parse_sweep_row(const std::string& entry) {
  SweepRow row;
  row.label = entry;
  if (entry.rfind("lambda(", 0) == 0 && entry.back() == ')') {
    const std::string inner = entry.substr(7, entry.size() - 8);
    const std::size_t comma = inner.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("lambda sweep entry must be lambda(kernel1,kernel2)");
    }
    row.is_lambda = true;
    row.kernel1 = inner.substr(0, comma);
    row.kernel2 = inner.substr(comma + 1);
    // validate names early
    parse_kernel_kind(row.kernel1);
    parse_kernel_kind(row.kernel2);
  } else if (entry == "lambda") {
    throw ConfigError("sweep entry 'lambda' needs kernels: lambda(kernel1,kernel2)");
  } else {
    row.kernel = entry;
    const KernelKind kind = parse_kernel_kind(entry);
    if (kind == KernelKind::UnitStep) {
      throw ConfigError("unit_step is not differentiable; usable only inside lambda()");
    }
  }
  return row;
}

RunConfig cell_config(const RunConfig& base, const SweepRow& row, double alpha) {
  RunConfig cfg = base;
  cfg.loss_alpha = alpha;
  if (row.is_lambda) {
    cfg.loss_family = "croloss_lambda";
    cfg.loss_kernel1 = row.kernel1;
    cfg.loss_kernel2 = row.kernel2;
  } else {
    cfg.loss_family = "croloss";
    cfg.loss_kernel = row.kernel;
  }
  return cfg;
}

std::string alpha_label(double alpha) {
  std::ostringstream os;
  os << alpha;
  return os.str();
}

// Trains one configuration against an already-loaded dataset and returns the
// trained model plus its test report. Shared by train and sweep so a
// single-cell sweep reproduces cmd_train exactly.
struct RunOutput {
  TrainResult result;
  EvalReport test_report;
};

RunOutput run_training(const RunConfig& cfg, const LoadedData& data) {
  const std::int64_t catalog = data.log.num_items();
  const TrainConfig tc = train_config_from_config(cfg, catalog);
  const ModelConfig mc = model_config_from_config(cfg, catalog);

  TwoTowerModel model = init_model(mc);
  BatchStream stream(data.train, cfg.data_n_bs, cfg.data_n_rn, catalog,
                     cfg.data_seed);
  RunOutput out;
  out.result = train(model, stream, data.train, data.validation, tc);
  out.test_report =
      recall_at_n(out.result.model, data.test, cfg.eval_ns,
                  cfg.eval_exclude_history, cfg.data_eval_targets);
  return out;
}

void write_run_outputs(const RunConfig& cfg, const fs::path& dir,
                       const RunOutput& out) {
  fs::create_directories(dir);
  std::ofstream(dir / "resolved_config.txt") << render_config(cfg);
  write_history(out.result.history, dir / "history.jsonl");
  save_checkpoint(out.result.model, dir / "checkpoint.bin");
  std::ofstream(dir / "eval_report.json")
      << report_to_json(out.test_report).dump() << '\n';
  std::ofstream(dir / "eval_report.txt") << render_report_table(out.test_report);
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
  const LoadedData data = load_dataset(cfg);
  const fs::path dir = fs::path(cfg.output_dir) / cfg.run_id;

  std::cout << "dataset: " << cfg.data_path << " (" << data.log.num_users()
            << " users, " << data.log.num_items() << " items, "
            << data.log.events.size() << " events)\n"
            << "samples: train " << data.train.size() << ", validation "
            << data.validation.size() << ", test " << data.test.size() << "\n";

  RunOutput out = run_training(cfg, data);
  write_run_outputs(cfg, dir, out);

  std::cout << "trained " << out.result.steps_run << " steps; best validation "
            << "recall@" << cfg.train_pivot_n << " = "
            << percent(out.result.best_recall) << " at step "
            << out.result.best_step << "\n\ntest split:\n"
            << render_report_table(out.test_report) << "outputs: " << dir.string()
            << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
             const std::string& split, const std::string& report_path) {
  if (!fs::exists(checkpoint)) {
    throw ConfigError("checkpoint does not exist: " + checkpoint);
  }
  const LoadedData data = load_dataset(cfg);
  const TwoTowerModel model = load_checkpoint(checkpoint);
  if (model.catalog != data.log.num_items()) {
    throw std::runtime_error("checkpoint catalog (" +
                             std::to_string(model.catalog) +
                             ") does not match dataset (" +
                             std::to_string(data.log.num_items()) + ")");
  }

  const std::vector<TrainingSample>* samples = &data.test;
  if (split == "validation") {
    samples = &data.validation;
  } else if (split == "train") {
    samples = &data.train;
  } else if (split != "test") {
    throw ConfigError("--split must be train, validation, or test");
  }

  const EvalReport report =
      recall_at_n(model, *samples, cfg.eval_ns, cfg.eval_exclude_history,
                  cfg.data_eval_targets);
  std::cout << split << " split:\n" << render_report_table(report);
  if (!report_path.empty()) {
    std::ofstream(report_path) << report_to_json(report).dump() << '\n';
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, int jobs) {
  if (cfg.sweep_kernels.empty() || cfg.sweep_alphas.empty()) {
    throw ConfigError("sweep requires sweep.kernels and sweep.alphas");
  }
  std::vector<SweepRow> rows;
  for (const std::string& entry : cfg.sweep_kernels) {
    rows.push_back(parse_sweep_row(entry));
  }

  const LoadedData data = load_dataset(cfg);
  std::cout << "dataset: " << cfg.data_path << " (" << data.log.num_users()
            << " users, " << data.log.num_items() << " items)\n"
            << "sweep: " << rows.size() << " kernels x " << cfg.sweep_alphas.size()
            << " alphas = " << rows.size() * cfg.sweep_alphas.size()
            << " cells, jobs=" << jobs << "\n";

  struct Cell {
    std::size_t row;
    std::size_t alpha_index;
  };
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t a = 0; a < cfg.sweep_alphas.size(); ++a) {
      cells.push_back({r, a});
    }
  }
  std::vector<CellResult> results(cells.size());

  const fs::path sweep_dir = fs::path(cfg.output_dir) / cfg.run_id;
  fs::create_directories(sweep_dir / "cells");

  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cells.size()) return;
      const SweepRow& row = rows[cells[c].row];
      const double alpha = cfg.sweep_alphas[cells[c].alpha_index];
      CellResult& result = results[c];
      result.kernel_label = row.label;
      result.alpha = alpha;
      try {
        RunConfig cc = cell_config(cfg, row, alpha);
        RunOutput out = run_training(cc, data);
        const fs::path cell_dir =
            sweep_dir / "cells" / (row.label + "_alpha" + alpha_label(alpha));
        write_run_outputs(cc, cell_dir, out);
        result.recall = out.test_report.recall_at;
        result.ok = true;
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << "cell " << row.label << " alpha=" << alpha
                  << " done (recall@" << cfg.train_pivot_n << " "
                  << percent(result.recall.count(cfg.train_pivot_n)
                                 ? result.recall.at(cfg.train_pivot_n)
                                 : 0.0)
                  << ")\n";
      } catch (const std::exception& e) {
        result.ok = false;
        result.error = e.what();
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cerr << "cell " << row.label << " alpha=" << alpha
                  << " FAILED: " << e.what() << "\n";
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();

  auto cell_at = [&](std::size_t r, std::size_t a) -> const CellResult& {
    return results[r * cfg.sweep_alphas.size() + a];
  };

  // Table: rows = kernels, one column block per N, one column per alpha.
  // '*' marks the row's best alpha for that N; [] marks the best overall.
  std::vector<int> ns = cfg.eval_ns;
  std::sort(ns.begin(), ns.end());
  std::ostringstream table;
  const int cell_width = 10;
  std::size_t label_width = 8;
  for (const SweepRow& row : rows) {
    label_width = std::max(label_width, row.label.size() + 1);
  }
  table << std::left << std::setw(static_cast<int>(label_width)) << "kernel";
  for (int n : ns) {
    std::string header = "Recall@" + std::to_string(n);
    table << "| " << std::setw(static_cast<int>(cfg.sweep_alphas.size()) * cell_width)
          << header;
  }
  table << '\n';
  table << std::setw(static_cast<int>(label_width)) << "";
  for (std::size_t block = 0; block < ns.size(); ++block) {
    table << "| ";
    for (double a : cfg.sweep_alphas) {
      table << std::setw(cell_width) << ("a=" + alpha_label(a));
    }
  }
  table << '\n';

  for (std::size_t r = 0; r < rows.size(); ++r) {
    table << std::setw(static_cast<int>(label_width)) << rows[r].label;
    for (int n : ns) {
      double row_best = -1.0;
      double overall_best = -1.0;
      for (std::size_t a = 0; a < cfg.sweep_alphas.size(); ++a) {
        const CellResult& cell = cell_at(r, a);
        if (cell.ok && cell.recall.count(n)) {
          row_best = std::max(row_best, cell.recall.at(n));
        }
      }
      for (std::size_t rr = 0; rr < rows.size(); ++rr) {
        for (std::size_t a = 0; a < cfg.sweep_alphas.size(); ++a) {
          const CellResult& cell = cell_at(rr, a);
          if (cell.ok && cell.recall.count(n)) {
            overall_best = std::max(overall_best, cell.recall.at(n));
          }
        }
      }
      table << "| ";
      for (std::size_t a = 0; a < cfg.sweep_alphas.size(); ++a) {
        const CellResult& cell = cell_at(r, a);
        std::string text;
        if (!cell.ok) {
          text = "FAIL";
        } else {
          const double v = cell.recall.at(n);
          text = percent(v);
          if (v == overall_best) {
            text = "[" + text + "]";
          } else if (v == row_best) {
            text += "*";
          }
        }
        table << std::setw(cell_width) << text;
      }
    }
    table << '\n';
  }
  table << "('*' best alpha within the kernel row, '[]' best overall per N)\n";

  std::ofstream(sweep_dir / "sweep_table.txt") << table.str();
  {
    std::ofstream jsonl(sweep_dir / "sweep_results.jsonl");
    for (const CellResult& r : results) {
      json recall = json::object();
      for (const auto& [n, value] : r.recall) recall[std::to_string(n)] = value;
      json line{{"kernel", r.kernel_label},
                {"alpha", r.alpha},
                {"status", r.ok ? "ok" : "failed"},
                {"recall", recall}};
      if (!r.ok) line["error"] = r.error;
      jsonl << line.dump() << '\n';
    }
  }

  std::cout << '\n' << table.str();
  const std::size_t failures = static_cast<std::size_t>(std::count_if(
      results.begin(), results.end(), [](const CellResult& r) { return !r.ok; }));
  if (failures > 0) {
    std::cerr << failures << " sweep cell(s) failed\n";
    return kExitRuntime;
  }
  std::cout << "sweep outputs: " << sweep_dir.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(bool quick, std::uint64_t seed, double corrupt_kernel_deriv) {
  GradcheckOptions opt;
  opt.quick = quick;
  opt.seed = seed;
  opt.kernel_deriv_scale = corrupt_kernel_deriv;
  const std::vector<CheckResult> results = run_full_battery(opt);
  std::size_t failed = 0;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name;
    std::cout << " (worst " << std::scientific << std::setprecision(2) << r.worst
              << std::defaultfloat << ")";
    if (!r.pass && !r.detail.empty()) std::cout << " -- " << r.detail;
    std::cout << '\n';
    if (!r.pass) ++failed;
  }
  std::cout << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_inspect_data(const RunConfig& cfg) {
  const LoadedData data = load_dataset(cfg);
  const BehaviorLog& log = data.log;

  std::vector<std::size_t> lengths;
  lengths.reserve(log.num_users());
  for (UserId u = 0; u < log.num_users(); ++u) {
    lengths.push_back(log.user_events(u).size());
  }
  std::sort(lengths.begin(), lengths.end());
  const double mean =
      static_cast<double>(log.events.size()) / static_cast<double>(log.num_users());

  std::cout << "dataset: " << cfg.data_path << "\n"
            << "events: " << log.events.size() << "\n"
            << "users: " << log.num_users() << "\n"
            << "items: " << log.num_items() << "\n"
            << "events per user: min " << lengths.front() << ", median "
            << lengths[lengths.size() / 2] << ", mean " << std::fixed
            << std::setprecision(2) << mean << ", max " << lengths.back() << "\n"
            << "split (seed " << cfg.data_seed << ", ratios "
            << cfg.data_split_ratios << "):\n"
            << "  train      " << data.split.train.size() << " users, "
            << data.train.size() << " samples\n"
            << "  validation " << data.split.validation.size() << " users, "
            << data.validation.size() << " samples (" << cfg.data_eval_targets
            << ")\n"
            << "  test       " << data.split.test.size() << " users, "
            << data.test.size() << " samples (" << cfg.data_eval_targets << ")\n";
  return kExitOk;
}

}  // namespace croloss::cli
