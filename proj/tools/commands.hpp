#pragma once

#include <string>
#include <vector>

#include "croloss/config.hpp"

namespace croloss::cli {

// Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
// 3 check failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitCheckFailed = 3;

int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg, const std::string& checkpoint,
             const std::string& split, const std::string& report_path);
int cmd_sweep(const RunConfig& cfg, int jobs);
int cmd_gradcheck(bool quick, std::uint64_t seed, double corrupt_kernel_deriv);
int cmd_inspect_data(const RunConfig& cfg);

}  // namespace croloss::cli
