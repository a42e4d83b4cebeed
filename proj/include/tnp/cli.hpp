#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tnp/config.hpp"

namespace tnp {

inline constexpr const char* kVersion = "0.1.0";

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// CSV with a provenance comment line, and a JSON mirror next to it.
void write_table(const std::filesystem::path& csv, const std::filesystem::path& json, const Table& table,
                 const std::string& hash, std::uint64_t seed);

/// Runs the configured command and writes results.csv, results.json and meta.json
/// (plus tilted.csv/json for `moments`) into `out`.
void execute(const RunConfig& cfg, const std::filesystem::path& out);

/// Exit codes: 0 success, 2 validation error, 3 numerical failure, 1 anything else.
int cli_main(int argc, char** argv);

} // namespace tnp
