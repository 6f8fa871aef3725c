#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "arena/loop.hpp"

namespace arena {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

// Entry point shared by the theory_arena binary and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Versioned CSV files. Every file starts with "# schema=v1".
inline constexpr std::string_view kCsvSchema = "# schema=v1";

void write_rows_csv(const std::string& path, const std::vector<RecoveryRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<RecoveryCell>& cells);

// Throws ArenaError(SchemaError) naming the offending line or column.
std::vector<RecoveryRow> read_rows_csv(const std::string& path);
std::vector<RecoveryCell> read_summary_csv(const std::string& path);

// Worker count from THEORY_ARENA_THREADS; unset means 1, 0 means all cores.
int threads_from_env();

}  // namespace arena
