#include "croloss/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace croloss {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(value, &used));
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
  } else {
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  // Comma-separated; commas inside parentheses (lambda kernel pairs) do not
  // split.
  std::vector<std::string> out;
  std::string current;
  int depth = 0;
  for (char c : value) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!trim(current).empty()) out.push_back(trim(current));
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

}  // namespace

void apply_config_value(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key == "run_id") {
    cfg.run_id = value;
  } else if (key == "output_dir") {
    cfg.output_dir = value;
  } else if (key == "data.path") {
    cfg.data_path = value;
  } else if (key == "data.delimiter") {
    cfg.data_delimiter = value;
  } else if (key == "data.max_len") {
    cfg.data_max_len = parse_number<int>(key, value);
  } else if (key == "data.n_bs") {
    cfg.data_n_bs = parse_number<int>(key, value);
  } else if (key == "data.n_rn") {
    cfg.data_n_rn = parse_number<int>(key, value);
  } else if (key == "data.seed") {
    cfg.data_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "data.eval_targets") {
    if (value != "all" && value != "last") {
      throw ConfigError("data.eval_targets must be 'all' or 'last'");
    }
    cfg.data_eval_targets = value;
  } else if (key == "data.split_ratios") {
    cfg.data_split_ratios = value;
  } else if (key == "model.embedding_dim") {
    cfg.model_embedding_dim = parse_number<int>(key, value);
  } else if (key == "model.hidden_dim") {
    cfg.model_hidden_dim = parse_number<int>(key, value);
  } else if (key == "model.output_dim") {
    cfg.model_output_dim = parse_number<int>(key, value);
  } else if (key == "model.tau") {
    cfg.model_tau = parse_number<double>(key, value);
  } else if (key == "model.seed") {
    cfg.model_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "loss.family") {
    cfg.loss_family = value;
  } else if (key == "loss.kernel") {
    cfg.loss_kernel = value;
  } else if (key == "loss.kernel1") {
    cfg.loss_kernel1 = value;
  } else if (key == "loss.kernel2") {
    cfg.loss_kernel2 = value;
  } else if (key == "loss.alpha") {
    cfg.loss_alpha = parse_number<double>(key, value);
  } else if (key == "loss.margin") {
    cfg.loss_margin = parse_number<double>(key, value);
  } else if (key == "train.lr") {
    cfg.train_lr = parse_number<double>(key, value);
  } else if (key == "train.beta1") {
    cfg.train_beta1 = parse_number<double>(key, value);
  } else if (key == "train.beta2") {
    cfg.train_beta2 = parse_number<double>(key, value);
  } else if (key == "train.eps") {
    cfg.train_eps = parse_number<double>(key, value);
  } else if (key == "train.epochs") {
    cfg.train_epochs = parse_number<int>(key, value);
  } else if (key == "train.eval_every") {
    cfg.train_eval_every = parse_number<int>(key, value);
  } else if (key == "train.patience") {
    cfg.train_patience = parse_number<int>(key, value);
  } else if (key == "train.seed") {
    cfg.train_seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "train.pivot_n") {
    cfg.train_pivot_n = parse_number<int>(key, value);
  } else if (key == "eval.ns") {
    cfg.eval_ns.clear();
    for (const std::string& part : split_list(value)) {
      cfg.eval_ns.push_back(parse_number<int>(key, part));
    }
    if (cfg.eval_ns.empty()) throw ConfigError("eval.ns must not be empty");
  } else if (key == "eval.exclude_history") {
    cfg.eval_exclude_history = parse_bool(key, value);
  } else if (key == "sweep.kernels") {
    cfg.sweep_kernels = split_list(value);
  } else if (key == "sweep.alphas") {
    cfg.sweep_alphas.clear();
    for (const std::string& part : split_list(value)) {
      cfg.sweep_alphas.push_back(parse_number<double>(key, part));
    }
  } else {
    throw ConfigError("unknown config key: '" + key + "'");
  }
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    try {
      apply_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "run_id = " << cfg.run_id << '\n';
  os << "output_dir = " << cfg.output_dir << '\n';
  os << "data.path = " << cfg.data_path << '\n';
  os << "data.delimiter = " << cfg.data_delimiter << '\n';
  os << "data.max_len = " << cfg.data_max_len << '\n';
  os << "data.n_bs = " << cfg.data_n_bs << '\n';
  os << "data.n_rn = " << cfg.data_n_rn << '\n';
  os << "data.seed = " << cfg.data_seed << '\n';
  os << "data.eval_targets = " << cfg.data_eval_targets << '\n';
  os << "data.split_ratios = " << cfg.data_split_ratios << '\n';
  os << "model.embedding_dim = " << cfg.model_embedding_dim << '\n';
  os << "model.hidden_dim = " << cfg.model_hidden_dim << '\n';
  os << "model.output_dim = " << cfg.model_output_dim << '\n';
  os << "model.tau = " << cfg.model_tau << '\n';
  os << "model.seed = " << cfg.model_seed << '\n';
  os << "loss.family = " << cfg.loss_family << '\n';
  os << "loss.kernel = " << cfg.loss_kernel << '\n';
  os << "loss.kernel1 = " << cfg.loss_kernel1 << '\n';
  os << "loss.kernel2 = " << cfg.loss_kernel2 << '\n';
  os << "loss.alpha = " << cfg.loss_alpha << '\n';
  os << "loss.margin = " << cfg.loss_margin << '\n';
  os << "train.lr = " << cfg.train_lr << '\n';
  os << "train.beta1 = " << cfg.train_beta1 << '\n';
  os << "train.beta2 = " << cfg.train_beta2 << '\n';
  os << "train.eps = " << cfg.train_eps << '\n';
  os << "train.epochs = " << cfg.train_epochs << '\n';
  os << "train.eval_every = " << cfg.train_eval_every << '\n';
  os << "train.patience = " << cfg.train_patience << '\n';
  os << "train.seed = " << cfg.train_seed << '\n';
  os << "train.pivot_n = " << cfg.train_pivot_n << '\n';
  {
    std::vector<std::string> parts;
    for (int n : cfg.eval_ns) parts.push_back(std::to_string(n));
    os << "eval.ns = " << join(parts) << '\n';
  }
  os << "eval.exclude_history = " << (cfg.eval_exclude_history ? "true" : "false")
     << '\n';
  if (!cfg.sweep_kernels.empty()) {
    os << "sweep.kernels = " << join(cfg.sweep_kernels) << '\n';
  }
  if (!cfg.sweep_alphas.empty()) {
    std::vector<std::string> parts;
    for (double a : cfg.sweep_alphas) {
      std::ostringstream p;
      p.precision(17);
      p << a;
      parts.push_back(p.str());
    }
    os << "sweep.alphas = " << join(parts) << '\n';
  }
  return os.str();
}

char delimiter_from_config(const RunConfig& cfg) {
  const std::string& d = cfg.data_delimiter;
  if (d == "tab" || d == "\\t") return '\t';
  if (d == "comma") return ',';
  if (d == "space") return ' ';
  if (d == "semicolon") return ';';
  if (d.size() == 1) return d[0];
  throw ConfigError("data.delimiter must be tab/comma/space/semicolon or one character");
}

std::array<int, 3> split_ratios_from_config(const RunConfig& cfg) {
  std::array<int, 3> out{};
  std::istringstream is(cfg.data_split_ratios);
  char c1 = 0, c2 = 0;
  if (!(is >> out[0] >> c1 >> out[1] >> c2 >> out[2]) || c1 != ':' || c2 != ':' ||
      !is.eof()) {
    throw ConfigError("data.split_ratios must look like '8:1:1'");
  }
  if (out[0] <= 0 || out[1] <= 0 || out[2] <= 0) {
    throw ConfigError("split ratios must be positive");
  }
  return out;
}

LossSpec loss_spec_from_config(const RunConfig& cfg, std::int64_t catalog) {
  LossSpec spec;
  try {
    spec.family = parse_loss_family(cfg.loss_family);
    spec.margin = cfg.loss_margin;
    if (spec.family == LossFamily::CROLoss) {
      spec.kernel = make_kernel(parse_kernel_kind(cfg.loss_kernel), cfg.loss_margin);
      spec.weighting = Weighting(cfg.loss_alpha, catalog);
    } else if (spec.family == LossFamily::CROLossLambda) {
      spec.kernel1 =
          make_kernel(parse_kernel_kind(cfg.loss_kernel1), cfg.loss_margin);
      spec.kernel2 =
          make_kernel(parse_kernel_kind(cfg.loss_kernel2), cfg.loss_margin);
      spec.weighting = Weighting(cfg.loss_alpha, catalog);
    }
    validate_loss_spec(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("loss configuration: ") + e.what());
  }
  return spec;
}

ModelConfig model_config_from_config(const RunConfig& cfg, std::int64_t catalog) {
  ModelConfig mc;
  mc.catalog = catalog;
  mc.embedding_dim = cfg.model_embedding_dim;
  mc.hidden_dim = cfg.model_hidden_dim;
  mc.output_dim = cfg.model_output_dim;
  mc.tau = cfg.model_tau;
  mc.seed = cfg.model_seed;
  if (mc.embedding_dim < 1 || mc.hidden_dim < 1 || mc.output_dim < 1) {
    throw ConfigError("model dimensions must be >= 1");
  }
  if (!(mc.tau > 0.0)) throw ConfigError("model.tau must be > 0");
  return mc;
}

TrainConfig train_config_from_config(const RunConfig& cfg, std::int64_t catalog) {
  TrainConfig tc;
  tc.loss = loss_spec_from_config(cfg, catalog);
  tc.adam.lr = cfg.train_lr;
  tc.adam.beta1 = cfg.train_beta1;
  tc.adam.beta2 = cfg.train_beta2;
  tc.adam.eps = cfg.train_eps;
  tc.epochs = cfg.train_epochs;
  tc.eval_every = cfg.train_eval_every;
  tc.patience = cfg.train_patience;
  tc.seed = cfg.train_seed;
  tc.pivot_n = cfg.train_pivot_n;
  tc.eval_ns = cfg.eval_ns;
  if (!(tc.adam.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (tc.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (tc.pivot_n < 1 || tc.pivot_n > catalog) {
    throw ConfigError("train.pivot_n must lie in [1, catalog]");
  }
  for (int n : tc.eval_ns) {
    if (n < 1 || n > catalog) {
      throw ConfigError("eval.ns entries must lie in [1, catalog]");
    }
  }
  return tc;
}

}  // namespace croloss
