#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ldplab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CliOptions {
  std::string subcommand;
  std::optional<std::filesystem::path> config;  // none: all defaults
  std::optional<std::uint64_t> seed;            // overrides the config seed
  std::filesystem::path out = "out";
  int workers = 1;
  std::vector<std::string> overrides;  // key=value
};

const std::vector<std::string>& subcommand_names();

// Runs one subcommand and writes its artifacts, a manifest.json and, on failure, a
// diagnostics.json into options.out. Returns the process exit code.
int run(const CliOptions& options, std::ostream& log, std::ostream& err);

// Flag parsing on top of run().
int run_cli(int argc, char** argv);

}  // namespace ldplab
