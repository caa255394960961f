#pragma once

#include "transcap/tasks.hpp"
#include "transcap/transport.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace transcap::harness {

enum class Scenario { esl_gap, rank_decay, threshold_sweep, composition_check, proxy_probe };

inline constexpr std::array<Scenario, 5> kAllScenarios{
    Scenario::esl_gap, Scenario::rank_decay, Scenario::threshold_sweep,
    Scenario::composition_check, Scenario::proxy_probe};

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view name);

struct RuleSettings {
    transport::StepKind kind = transport::StepKind::gradient_descent;
    double step_size = 0.1;
    double noise_scale = 0.0;
    double weight_decay = 0.0;

    transport::StepRule to_rule() const;
    friend bool operator==(const RuleSettings&, const RuleSettings&) = default;
};

struct Thresholds {
    double tau_sigma = 1e-3;
    double eps_a = 1e-6;
    double eps_b = 1e-4;
    double eps_low = 1e-6;
    double eps_high = 1e-2;
    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct EslSettings {
    std::vector<double> hessian_spectrum{2.0, 0.25};
    std::uint64_t rotation_seed = 11;
    std::vector<double> initial_mean{2.0, -1.0};
    double initial_variance = 3.0;
    int interpolation_steps = 1000;
    std::vector<int> refinement_steps{10, 100, 1000};
    friend bool operator==(const EslSettings&, const EslSettings&) = default;
};

struct SweepSettings {
    std::vector<int> m_b_targets{0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> usable_targets{0, 1, 2, 3, 4, 5, 6, 7, 8};
    /// Decay applied to the directions collapsed in phase 1.
    double phase1_weight_decay = 10.0;
    double phase2_step_size = 1.8;
    int phase2_max_steps = 2000;
    friend bool operator==(const SweepSettings&, const SweepSettings&) = default;
};

struct CompositionSettings {
    int n_trials = 1000;
    int max_steps = 64;
    int n_matrix_pairs = 1000;
    int max_pair_dim = 32;
    friend bool operator==(const CompositionSettings&, const CompositionSettings&) = default;
};

struct ProxySettings {
    int checkpoint_every = 30;
    /// 0 means 100 * dim.
    int gradient_samples = 0;
    double gradient_noise = 1.0;
    /// Relative decay rate per compatible direction; empty means (i + 1) / k_a.
    std::vector<double> decay_profile{};
    friend bool operator==(const ProxySettings&, const ProxySettings&) = default;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::rank_decay;
    int dim = 16;
    int k_a = 8;
    RuleSettings rule;
    int n_steps = 200;
    int n_realizations = 64;
    std::uint64_t master_seed = 20260101;
    /// Spread of the initial ensemble around theta*.
    double initial_std = 0.1;
    tasks::TaskPairSpec task_pair;
    Thresholds thresholds;
    EslSettings esl;
    SweepSettings sweep;
    CompositionSettings composition;
    ProxySettings proxy;
    std::string output_dir = "transcap-output";

    /// task_pair with dim and k_a filled in from the top level.
    tasks::TaskPairSpec pair_spec() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Desk-scale defaults for a scenario.
ExperimentConfig default_config(Scenario s);

/// Parses a config document. Missing keys take the scenario defaults; unknown
/// keys and malformed values throw ConfigError naming the field.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Range and stability checks (including eta * lambda_max < 2 for every
/// phase the scenario runs). Throws ConfigError.
void validate(const ExperimentConfig& cfg);

/// Hex SHA-256 of the canonical JSON form.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace transcap::harness
