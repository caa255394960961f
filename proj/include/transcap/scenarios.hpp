#pragma once

#include "transcap/config.hpp"
#include "transcap/io.hpp"

#include <string>
#include <vector>

#include <json.hpp>

namespace transcap::harness {

struct ScenarioResult {
    std::vector<Table> tables;
    nlohmann::json summary;
    /// Contract violations found while running; reported as failures under --check.
    std::vector<std::string> violations;
};

/// Langevin relaxation vs. the OT geodesic between the same Gaussian endpoints.
ScenarioResult run_esl_gap(const ExperimentConfig& cfg, std::size_t workers = 0);
/// R(t), R_A(t), usable count and the compatible singular profile while training on task A.
ScenarioResult run_rank_decay(const ExperimentConfig& cfg, std::size_t workers = 0);
/// Contract-then-adapt grid over (usable count, m_B) cells.
ScenarioResult run_threshold_sweep(const ExperimentConfig& cfg, std::size_t workers = 0);
/// Randomized split-and-compose replays plus matrix-product rank and singular-value bounds.
ScenarioResult run_composition_check(const ExperimentConfig& cfg, std::size_t workers = 0);
/// Gradient-covariance participation ratio vs. usable count along a graded-decay run.
ScenarioResult run_proxy_probe(const ExperimentConfig& cfg, std::size_t workers = 0);

ScenarioResult run_scenario(const ExperimentConfig& cfg, std::size_t workers = 0);

} // namespace transcap::harness
