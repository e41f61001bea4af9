#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ldb {

// Exit code contract: 0 success, 1 internal failure, 2 config error,
// 3 diverged training, 4 I/O or file-format error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIo = 4;

/// Command-line flags that override values from the config file.
struct CliOverrides {
    std::optional<int> epochs;
    std::optional<std::string> preset;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed_data;
    std::optional<std::uint64_t> seed_init;
    std::optional<std::uint64_t> seed_select;
};

int cmd_train(const std::string& config_path, const CliOverrides& overrides, bool baseline);
int cmd_gradcheck(const std::string& preset, std::uint64_t seed, bool corrupt);
int cmd_sweep(const std::string& axis, const std::vector<double>& values,
              const std::string& config_path, const CliOverrides& overrides);
int cmd_bench(const std::string& config_path, const CliOverrides& overrides, int steps);

} // namespace ldb
