#pragma once

// Command implementations behind the async_lab executable. Each returns the
// process exit code and writes only to the supplied streams and directories.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "async_lab/scenario_io.hpp"

namespace async_lab {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int invalid = 2;     ///< schema, invalid input or solver failure
inline constexpr int infeasible = 3;
inline constexpr int runtime = 4;
inline constexpr int golden = 5;
}  // namespace exit_code

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;  ///< consensus tolerance override
};

/// Worker count for parallel runs: ASYNC_LAB_THREADS if set (>= 1), otherwise
/// the hardware concurrency, never above it.
unsigned thread_cap();

/// Bound keys (the --theorem values): 1, 2, 3, 4, c1, c2, 5. Throws ScenarioError on missing inputs.
BoundReport compute_bound(ScenarioFile& f, const std::string& theorem);

struct RunOutcome {
  Trace trace;
  Metrics metrics;
  nlohmann::json report;
};
/// Resolves the gain, runs and evaluates one scenario; writes files only when
/// out_dir is given.
RunOutcome run_scenario(ScenarioFile f, const GlobalOptions& opts,
                        const std::optional<std::filesystem::path>& out_dir);

struct GoldenRow {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  double tol = 0.0;      ///< |value - expected| <= tol, or value < expected when below
  bool below = false;
  bool passed = false;
  std::string note;
};
std::vector<GoldenRow> evaluate_goldens(int example, const GlobalOptions& opts, int seeds = 4);

int cmd_design(const std::filesystem::path& file, std::ostream& out, std::ostream& err);
int cmd_bound(const std::filesystem::path& file, const std::string& theorem,
              std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& file, const std::filesystem::path& out_dir,
            const GlobalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_reproduce(int example, const GlobalOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace async_lab
