#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "croloss/losses.hpp"
#include "croloss/model.hpp"
#include "croloss/trainer.hpp"

namespace croloss {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat run configuration behind the `key = value` config-file format and
/// the repeatable `--set key=value` CLI override. Unknown keys are rejected;
/// every run writes its fully resolved form next to its outputs.
struct RunConfig {
  std::string run_id = "run";
  std::string output_dir = "runs";

  // data
  std::string data_path;
  std::string data_delimiter = "tab";  // tab | comma | space | semicolon
  int data_max_len = 20;
  int data_n_bs = 256;
  int data_n_rn = 10;
  std::uint64_t data_seed = 42;
  std::string data_eval_targets = "all";  // all | last
  std::string data_split_ratios = "8:1:1";

  // model
  int model_embedding_dim = 32;
  int model_hidden_dim = 32;
  int model_output_dim = 32;
  double model_tau = 10.0;
  std::uint64_t model_seed = 1;

  // loss
  std::string loss_family = "croloss";
  std::string loss_kernel = "softplus";
  std::string loss_kernel1 = "sigmoid";
  std::string loss_kernel2 = "softplus";
  double loss_alpha = 1.0;
  double loss_margin = 5.0;

  // train
  double train_lr = 0.02;
  double train_beta1 = 0.9;
  double train_beta2 = 0.999;
  double train_eps = 1e-8;
  int train_epochs = 3;
  int train_eval_every = 200;
  int train_patience = 5;
  std::uint64_t train_seed = 42;
  int train_pivot_n = 50;

  // eval
  std::vector<int> eval_ns = {50, 100, 200, 500};
  bool eval_exclude_history = false;

  // sweep
  std::vector<std::string> sweep_kernels;  // kernel names or lambda(k1,k2)
  std::vector<double> sweep_alphas;
};

/// Parses one `key = value` file ('#' lines are comments). Throws
/// ConfigError with the offending line number.
RunConfig parse_config_file(const std::filesystem::path& path);

/// Applies one key/value pair; throws ConfigError for unknown keys or
/// unparseable values.
void apply_config_value(RunConfig& cfg, const std::string& key,
                        const std::string& value);

/// Canonical resolved form, parseable back through parse_config_file.
std::string render_config(const RunConfig& cfg);

// Bridges from the flat config to the typed module inputs. All throw
// ConfigError on invalid combinations.
char delimiter_from_config(const RunConfig& cfg);
std::array<int, 3> split_ratios_from_config(const RunConfig& cfg);
LossSpec loss_spec_from_config(const RunConfig& cfg, std::int64_t catalog);
ModelConfig model_config_from_config(const RunConfig& cfg, std::int64_t catalog);
TrainConfig train_config_from_config(const RunConfig& cfg, std::int64_t catalog);

}  // namespace croloss
