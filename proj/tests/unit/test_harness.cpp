#include "transcap/config.hpp"
#include "transcap/harness.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

using namespace transcap::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("transcap_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_doc(const fs::path& dir, const nlohmann::json& doc) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << doc.dump(2);
    return p;
}

int run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "transcap");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    testing::internal::CaptureStderr();
    testing::internal::CaptureStdout();
    const int code = cli_main(static_cast<int>(argv.size()), argv.data());
    testing::internal::GetCapturedStdout();
    testing::internal::GetCapturedStderr();
    return code;
}

nlohmann::json small_rank_decay() {
    return {{"scenario", "rank-decay"}, {"n_steps", 10}, {"n_realizations", 4}};
}

} // namespace

TEST(Cli, InformationalCommands) {
    EXPECT_EQ(run_cli({"version"}), kExitOk);
    EXPECT_EQ(run_cli({"scenarios"}), kExitOk);
    EXPECT_EQ(run_cli({"default-config", "esl-gap"}), kExitOk);
    EXPECT_EQ(run_cli({"default-config", "bogus"}), kExitConfigError);
}

TEST(Cli, UsageErrorIsConfigError) {
    EXPECT_EQ(run_cli({}), kExitConfigError);
    EXPECT_EQ(run_cli({"run"}), kExitConfigError);
    EXPECT_EQ(run_cli({"frobnicate"}), kExitConfigError);
}

TEST(Cli, ValidateExitCodes) {
    const fs::path dir = scratch("validate");
    EXPECT_EQ(run_cli({"validate", write_doc(dir, small_rank_decay()).string()}), kExitOk);
    EXPECT_EQ(run_cli({"validate", write_doc(dir, {{"scenario", "rank-decay"}, {"bogus", 1}}).string()}),
              kExitConfigError);
    std::ofstream(dir / "broken.json") << "{ not json";
    EXPECT_EQ(run_cli({"validate", (dir / "broken.json").string()}), kExitConfigError);
    EXPECT_EQ(run_cli({"validate", (dir / "absent.json").string()}), kExitConfigError);
}

TEST(Cli, RunWritesOutputs) {
    const fs::path dir = scratch("run");
    const fs::path out = dir / "out";
    EXPECT_EQ(run_cli({"run", write_doc(dir, small_rank_decay()).string(), "-o", out.string(), "--check"}), kExitOk);
    for (const char* f : {"rank_decay.csv", "rank_decay.csv.json", "summary.json", "config.json", "run_manifest.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    std::ifstream in(out / "run_manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    EXPECT_EQ(manifest["schema_version"], kSchemaVersion);
    EXPECT_TRUE(manifest.contains("seed_ledger"));
    EXPECT_FALSE(manifest["outputs"].empty());
}

TEST(Cli, NumericalFailureExitsTwo) {
    const fs::path dir = scratch("numerical");
    nlohmann::json doc = small_rank_decay();
    doc["initial_std"] = 1e9;
    EXPECT_EQ(run_cli({"run", write_doc(dir, doc).string(), "-o", (dir / "out").string()}), kExitNumericalError);
}

TEST(Cli, ContractViolationUnderCheckExitsThree) {
    const fs::path dir = scratch("violation");
    nlohmann::json doc{{"scenario", "threshold-sweep"},
                       {"thresholds", {{"eps_high", 100.0}}},
                       {"sweep", {{"m_b_targets", {0, 2}}, {"usable_targets", {0, 8}}}}};
    const std::string cfg = write_doc(dir, doc).string();
    EXPECT_EQ(run_cli({"run", cfg, "-o", (dir / "a").string(), "--check"}), kExitContractViolation);
    EXPECT_EQ(run_cli({"run", cfg, "-o", (dir / "b").string()}), kExitOk);
}

TEST(Harness, OutputDirectoryPrecedence) {
    ExperimentConfig cfg = default_config(Scenario::rank_decay);
    cfg.output_dir = "from-config";
    ::unsetenv("TRANSCAP_OUTPUT_DIR");
    EXPECT_EQ(resolve_output_dir(cfg, {}), fs::path("from-config"));
    ::setenv("TRANSCAP_OUTPUT_DIR", "from-env", 1);
    EXPECT_EQ(resolve_output_dir(cfg, {}), fs::path("from-env"));
    RunOptions opt;
    opt.output_dir = "from-cli";
    EXPECT_EQ(resolve_output_dir(cfg, opt), fs::path("from-cli"));
    ::unsetenv("TRANSCAP_OUTPUT_DIR");
}

TEST(Harness, WorkerCountDoesNotChangeOutputs) {
    ExperimentConfig cfg = config_from_json(small_rank_decay());
    RunOptions a, b;
    a.output_dir = scratch("workers_a");
    a.workers = 1;
    b.output_dir = scratch("workers_b");
    b.workers = 3;
    run_experiment(cfg, a);
    run_experiment(cfg, b);
    for (const auto& e : fs::directory_iterator(*a.output_dir)) {
        if (e.path().filename() == "run_manifest.json") continue;
        std::ifstream fa(e.path(), std::ios::binary), fb(*b.output_dir / e.path().filename(), std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        EXPECT_EQ(sa, sb) << e.path().filename();
    }
}
