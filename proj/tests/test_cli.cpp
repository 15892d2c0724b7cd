// Drives the installed CLI binary end to end. The binary path arrives via
// the CROLOSS_BIN environment variable (set by ctest); the cases are skipped
// when it is missing so the test executable still runs standalone.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "croloss/synth.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const char* bin = std::getenv("CROLOSS_BIN");
  REQUIRE(bin != nullptr);
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof(buf), pipe)) {
    r.output.append(buf, n);
    if (n < sizeof(buf)) {
      if (feof(pipe)) break;
    }
  }
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

bool cli_available() { return std::getenv("CROLOSS_BIN") != nullptr; }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One tiny dataset + config shared by the CLI cases.
struct CliFixture {
  fs::path dir;
  fs::path dataset;
  fs::path config;

  CliFixture() {
    dir = fs::temp_directory_path() / "croloss_cli_fixture";
    fs::remove_all(dir);
    fs::create_directories(dir);
    dataset = dir / "data.tsv";

    croloss::SynthConfig synth;
    synth.users = 150;
    synth.items = 120;
    synth.clusters = 6;
    synth.seed = 12;
    croloss::write_tsv(croloss::make_clustered_log(synth), dataset);

    config = dir / "run.cfg";
    std::ofstream(config) << "run_id = cli_test\n"
                          << "output_dir = " << (dir / "runs").string() << "\n"
                          << "data.path = " << dataset.string() << "\n"
                          << "data.n_bs = 32\n"
                          << "data.n_rn = 3\n"
                          << "train.epochs = 1\n"
                          << "train.eval_every = 10\n"
                          << "train.pivot_n = 10\n"
                          << "eval.ns = 10,50\n";
  }
};

}  // namespace

TEST_CASE("cli: train writes deterministic outputs and honors --set") {
  if (!cli_available()) return;
  const CliFixture fx;

  const RunResult first = run_cli("train --config " + fx.config.string() +
                                  " --set loss.alpha=1.2 --set run_id=a");
  CHECK(first.exit_code == 0);
  const fs::path run_a = fx.dir / "runs" / "a";
  CHECK(fs::exists(run_a / "history.jsonl"));
  CHECK(fs::exists(run_a / "checkpoint.bin"));
  CHECK(fs::exists(run_a / "eval_report.json"));
  CHECK(slurp(run_a / "resolved_config.txt").find("loss.alpha = 1.2") !=
        std::string::npos);

  const RunResult second = run_cli("train --config " + fx.config.string() +
                                   " --set loss.alpha=1.2 --set run_id=b");
  CHECK(second.exit_code == 0);
  const fs::path run_b = fx.dir / "runs" / "b";
  CHECK(slurp(run_a / "history.jsonl") == slurp(run_b / "history.jsonl"));
  CHECK(slurp(run_a / "eval_report.json") == slurp(run_b / "eval_report.json"));
  CHECK(slurp(run_a / "checkpoint.bin") == slurp(run_b / "checkpoint.bin"));
}

TEST_CASE("cli: eval loads the checkpoint it trained") {
  if (!cli_available()) return;
  const CliFixture fx;
  REQUIRE(run_cli("train --config " + fx.config.string()).exit_code == 0);
  const fs::path ckpt = fx.dir / "runs" / "cli_test" / "checkpoint.bin";

  const RunResult eval = run_cli("eval --config " + fx.config.string() +
                                 " --checkpoint " + ckpt.string() +
                                 " --split validation --report " +
                                 (fx.dir / "report.json").string());
  CHECK(eval.exit_code == 0);
  CHECK(eval.output.find("Recall@N") != std::string::npos);
  CHECK(fs::exists(fx.dir / "report.json"));

  const RunResult missing = run_cli("eval --config " + fx.config.string() +
                                    " --checkpoint /nonexistent.bin");
  CHECK(missing.exit_code == 1);
}

TEST_CASE("cli: missing dataset fails with exit 1 and no partial outputs") {
  if (!cli_available()) return;
  const CliFixture fx;
  const fs::path cfg = fx.dir / "missing.cfg";
  std::ofstream(cfg) << "run_id = broken\n"
                     << "output_dir = " << (fx.dir / "runs_missing").string() << "\n"
                     << "data.path = " << (fx.dir / "nope.tsv").string() << "\n";
  const RunResult r = run_cli("train --config " + cfg.string());
  CHECK(r.exit_code == 1);
  CHECK_FALSE(fs::exists(fx.dir / "runs_missing"));
}

TEST_CASE("cli: config errors exit with 1") {
  if (!cli_available()) return;
  const CliFixture fx;
  const RunResult unknown = run_cli("train --config " + fx.config.string() +
                                    " --set no.such.key=1");
  CHECK(unknown.exit_code == 1);
  const RunResult no_sub = run_cli("");
  CHECK(no_sub.exit_code == 1);
  const RunResult no_cfg = run_cli("train");
  CHECK(no_cfg.exit_code == 1);
}

TEST_CASE("cli: single-cell sweep reproduces cmd_train") {
  if (!cli_available()) return;
  const CliFixture fx;

  REQUIRE(run_cli("train --config " + fx.config.string() +
                  " --set run_id=solo --set loss.family=croloss"
                  " --set loss.kernel=softplus --set loss.alpha=1.0")
              .exit_code == 0);

  const RunResult sweep = run_cli(
      "sweep --config " + fx.config.string() +
      " --set run_id=grid --set sweep.kernels=softplus --set sweep.alphas=1.0");
  CHECK(sweep.exit_code == 0);

  const fs::path solo = fx.dir / "runs" / "solo" / "eval_report.json";
  const fs::path cell =
      fx.dir / "runs" / "grid" / "cells" / "softplus_alpha1" / "eval_report.json";
  REQUIRE(fs::exists(solo));
  REQUIRE(fs::exists(cell));
  CHECK(slurp(solo) == slurp(cell));
  CHECK(fs::exists(fx.dir / "runs" / "grid" / "sweep_table.txt"));
  CHECK(fs::exists(fx.dir / "runs" / "grid" / "sweep_results.jsonl"));
}

TEST_CASE("cli: sweep table covers the grid") {
  if (!cli_available()) return;
  const CliFixture fx;
  const RunResult sweep = run_cli(
      "sweep --config " + fx.config.string() + " --jobs 2" +
      " --set run_id=grid2"
      " --set 'sweep.kernels=sigmoid,lambda(sigmoid,softplus)'"
      " --set sweep.alphas=0.6,1.2");
  CHECK(sweep.exit_code == 0);
  const std::string table = slurp(fx.dir / "runs" / "grid2" / "sweep_table.txt");
  CHECK(table.find("sigmoid") != std::string::npos);
  CHECK(table.find("lambda(sigmoid,softplus)") != std::string::npos);
  CHECK(table.find("Recall@10") != std::string::npos);
  CHECK(table.find("Recall@50") != std::string::npos);

  const RunResult bad = run_cli("sweep --config " + fx.config.string() +
                                " --set sweep.kernels=unit_step --set sweep.alphas=1.0");
  CHECK(bad.exit_code == 1);
}

TEST_CASE("cli: gradcheck passes clean and flags corruption") {
  if (!cli_available()) return;
  const RunResult quick = run_cli("gradcheck --quick");
  CHECK(quick.exit_code == 0);
  CHECK(quick.output.find("[PASS]") != std::string::npos);
  CHECK(quick.output.find("[FAIL]") == std::string::npos);

  const RunResult corrupted = run_cli("gradcheck --quick --corrupt-kernel-deriv 2.0");
  CHECK(corrupted.exit_code == 3);
  CHECK(corrupted.output.find("[FAIL] kernel_derivative") != std::string::npos);
}

TEST_CASE("cli: inspect-data reports the catalog and split") {
  if (!cli_available()) return;
  const CliFixture fx;
  const RunResult r = run_cli("inspect-data --config " + fx.config.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("users: 150") != std::string::npos);
  CHECK(r.output.find("items: 120") != std::string::npos);
  CHECK(r.output.find("train") != std::string::npos);
}
