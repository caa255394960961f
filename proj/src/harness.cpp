#include "transcap/harness.hpp"

#include "transcap/errors.hpp"
#include "transcap/io.hpp"
#include "transcap/parallel.hpp"

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#ifndef TRANSCAP_VERSION
#define TRANSCAP_VERSION "0.0.0"
#endif

namespace transcap::harness {

namespace {

void emit(std::ostream& os, const nlohmann::json& record) { os << record.dump() << std::endl; }

nlohmann::json error_record(std::string_view kind, const std::string& message,
                            const std::string& field = {}) {
    nlohmann::json j{{"status", "error"}, {"kind", kind}, {"message", message}};
    if (!field.empty()) {
        j["field"] = field;
    }
    return j;
}

nlohmann::json seed_ledger(const ExperimentConfig& cfg) {
    return {
        {"master_seed", cfg.master_seed},
        {"task_rotation_seed", cfg.task_pair.rotation_seed},
        {"esl_rotation_seed", cfg.esl.rotation_seed},
        {"n_realizations", cfg.n_realizations},
        {"key_derivation", "splitmix64 chain over (master_seed, realization, step, stream)"},
        {"streams", {{"noise", 1}, {"initial", 2}, {"rotation", 3}, {"probe", 4}, {"trial", 5}}},
    };
}

} // namespace

std::string_view version() { return TRANSCAP_VERSION; }

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
    if (options.output_dir) {
        return *options.output_dir;
    }
    if (const char* env = std::getenv("TRANSCAP_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.output_dir;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    validate(cfg);
    RunOutcome out;
    out.output_dir = resolve_output_dir(cfg, options);
    const std::size_t workers = options.workers > 0 ? options.workers : default_workers();
    const std::string started = utc_timestamp();
    const std::string hash = config_hash(cfg);

    out.result = run_scenario(cfg, workers);

    std::filesystem::create_directories(out.output_dir);
    nlohmann::json files = nlohmann::json::array();
    auto record = [&](const std::filesystem::path& path) {
        files.push_back({{"file", path.filename().string()}, {"sha256", sha256_file(path)}});
    };
    for (const Table& t : out.result.tables) {
        const auto csv = write_table(t, out.output_dir, hash);
        record(csv);
        record(out.output_dir / (t.name() + ".csv.json"));
    }
    nlohmann::json summary = out.result.summary;
    summary["scenario"] = std::string(to_string(cfg.scenario));
    summary["config_hash"] = hash;
    summary["violations"] = out.result.violations;
    const auto summary_path = out.output_dir / "summary.json";
    write_json(summary, summary_path);
    record(summary_path);
    const auto config_path = out.output_dir / "config.json";
    save_config(cfg, config_path);
    record(config_path);

    out.manifest = {
        {"schema_version", kSchemaVersion},
        {"artifact", "transcap"},
        {"version", std::string(version())},
        {"scenario", std::string(to_string(cfg.scenario))},
        {"config", config_to_json(cfg)},
        {"config_hash", hash},
        {"started_at", started},
        {"finished_at", utc_timestamp()},
        {"workers", workers},
        {"outputs", files},
        {"seed_ledger", seed_ledger(cfg)},
        {"violations", out.result.violations},
    };
    write_json(out.manifest, out.output_dir / "run_manifest.json");
    return out;
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"transcap: transport-map capacity experiments", "transcap"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version()));

    std::string run_config;
    std::optional<std::string> run_output;
    bool check = false;
    std::size_t workers = 0;
    auto* run = app.add_subcommand("run", "Run the scenario described by a config file");
    run->add_option("config", run_config, "Config file (JSON)")->required();
    run->add_option("-o,--output", run_output, "Output directory (overrides config and env)");
    run->add_flag("--check", check, "Exit 3 if any contract check fails");
    run->add_option("-w,--workers", workers, "Worker threads (default: TRANSCAP_WORKERS or cores)");

    std::string validate_config;
    auto* val = app.add_subcommand("validate", "Parse and range-check a config file");
    val->add_option("config", validate_config, "Config file (JSON)")->required();

    auto* list = app.add_subcommand("scenarios", "List scenario names");
    auto* ver = app.add_subcommand("version", "Print the version");

    std::string default_name;
    auto* def = app.add_subcommand("default-config", "Print the default config for a scenario");
    def->add_option("scenario", default_name, "Scenario name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit(std::cerr, error_record("usage", e.what()));
        return kExitConfigError;
    }

    try {
        if (*list) {
            for (Scenario s : kAllScenarios) {
                std::cout << to_string(s) << '\n';
            }
            return kExitOk;
        }
        if (*ver) {
            std::cout << "transcap " << version() << '\n';
            return kExitOk;
        }
        if (*def) {
            std::cout << config_to_json(default_config(scenario_from_string(default_name))).dump(2)
                      << '\n';
            return kExitOk;
        }
        if (*val) {
            const ExperimentConfig cfg = load_config(validate_config);
            validate(cfg);
            emit(std::cout, {{"status", "ok"},
                             {"scenario", std::string(to_string(cfg.scenario))},
                             {"config_hash", config_hash(cfg)}});
            return kExitOk;
        }
        const ExperimentConfig cfg = load_config(run_config);
        RunOptions options;
        if (run_output) {
            options.output_dir = *run_output;
        }
        options.workers = workers;
        const RunOutcome outcome = run_experiment(cfg, options);
        const auto& violations = outcome.result.violations;
        if (check && !violations.empty()) {
            for (const std::string& v : violations) {
                emit(std::cerr, {{"status", "violation"}, {"message", v}});
            }
            return kExitContractViolation;
        }
        emit(std::cout, {{"status", "ok"},
                         {"scenario", std::string(to_string(cfg.scenario))},
                         {"output_dir", outcome.output_dir.string()},
                         {"violations", violations.size()},
                         {"summary", outcome.result.summary}});
        return kExitOk;
    } catch (const ConfigError& e) {
        emit(std::cerr, error_record("config", e.what(), e.field()));
        return kExitConfigError;
    } catch (const NumericalError& e) {
        emit(std::cerr, error_record("numerical", e.what()));
        return kExitNumericalError;
    } catch (const std::exception& e) {
        emit(std::cerr, error_record("runtime", e.what()));
        return kExitNumericalError;
    }
}

} // namespace transcap::harness
