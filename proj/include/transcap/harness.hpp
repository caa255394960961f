#pragma once

#include "transcap/config.hpp"
#include "transcap/scenarios.hpp"

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

namespace transcap::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNumericalError = 2;
inline constexpr int kExitContractViolation = 3;

std::string_view version();

struct RunOptions {
    /// Overrides TRANSCAP_OUTPUT_DIR and the config's output_dir.
    std::optional<std::filesystem::path> output_dir;
    /// 0 means TRANSCAP_WORKERS or the hardware concurrency.
    std::size_t workers = 0;
};

struct RunOutcome {
    std::filesystem::path output_dir;
    ScenarioResult result;
    nlohmann::json manifest;
};

/// Output directory precedence: options, then TRANSCAP_OUTPUT_DIR, then the config.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options);

/// Validates, runs the scenario, writes every table with its sidecar,
/// summary.json, and run_manifest.json (timestamps, checksums, seed ledger).
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Command-line entry point; returns the process exit code. Errors go to
/// stderr as one JSON object per line.
int cli_main(int argc, const char* const* argv);

} // namespace transcap::harness
