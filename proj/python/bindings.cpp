#include "transcap/capacity.hpp"
#include "transcap/config.hpp"
#include "transcap/errors.hpp"
#include "transcap/harness.hpp"
#include "transcap/scenarios.hpp"
#include "transcap/spectral.hpp"
#include "transcap/thermo.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace transcap;

namespace {

harness::ExperimentConfig parse_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return harness::config_from_json(doc);
}

std::string scenario_result_json(const harness::ScenarioResult& r) {
    nlohmann::json tables = nlohmann::json::object();
    for (const harness::Table& t : r.tables) {
        tables[t.name()] = {{"columns", t.columns()}, {"rows", t.rows()}, {"units", t.units()}};
    }
    return nlohmann::json{{"summary", r.summary}, {"violations", r.violations}, {"tables", tables}}.dump();
}

thermo::GaussianState gaussian(const Vector& mean, const Matrix& cov) { return {mean, cov}; }

} // namespace

PYBIND11_MODULE(_transcap, m) {
    m.doc() = "Transport-map capacity diagnostics (native core)";

    auto base = py::register_exception<Error>(m, "TranscapError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());

    m.def("version", [] { return std::string(harness::version()); });
    m.def("scenarios", [] {
        std::vector<std::string> out;
        for (harness::Scenario s : harness::kAllScenarios) out.emplace_back(harness::to_string(s));
        return out;
    });
    m.def("default_config_json", [](const std::string& scenario) {
        return harness::config_to_json(harness::default_config(harness::scenario_from_string(scenario))).dump();
    });
    m.def("normalize_config_json", [](const std::string& text) {
        return harness::config_to_json(parse_config(text)).dump();
    });
    m.def("validate_config_json", [](const std::string& text) {
        const harness::ExperimentConfig cfg = parse_config(text);
        harness::validate(cfg);
        return harness::config_hash(cfg);
    });
    m.def(
        "run_scenario_json",
        [](const std::string& text, std::size_t workers) {
            const harness::ExperimentConfig cfg = parse_config(text);
            harness::validate(cfg);
            harness::ScenarioResult r;
            {
                py::gil_scoped_release release;
                r = harness::run_scenario(cfg, workers);
            }
            return scenario_result_json(r);
        },
        py::arg("config"), py::arg("workers") = 0);
    m.def(
        "run_experiment_json",
        [](const std::string& text, std::optional<std::string> output_dir, std::size_t workers) {
            const harness::ExperimentConfig cfg = parse_config(text);
            harness::RunOptions options;
            if (output_dir) options.output_dir = *output_dir;
            options.workers = workers;
            harness::RunOutcome out;
            {
                py::gil_scoped_release release;
                out = harness::run_experiment(cfg, options);
            }
            return py::make_tuple(out.output_dir.string(), out.manifest.dump());
        },
        py::arg("config"), py::arg("output_dir") = py::none(), py::arg("workers") = 0);

    m.def("singular_values", &spectral::singular_values, py::arg("a"));
    m.def("log_gram_volume", &spectral::log_gram_volume, py::arg("j"));
    m.def("stable_rank", &spectral::stable_rank, py::arg("h"));
    m.def("numerical_rank", &spectral::numerical_rank, py::arg("a"), py::arg("rel_tol") = spectral::kRankTolerance);

    m.def(
        "w2_gaussian",
        [](const Vector& m1, const Matrix& c1, const Vector& m2, const Matrix& c2) {
            return thermo::w2_gaussian(gaussian(m1, c1), gaussian(m2, c2));
        },
        py::arg("mean1"), py::arg("cov1"), py::arg("mean2"), py::arg("cov2"));
    m.def(
        "entropy", [](const Vector& mean, const Matrix& cov) { return thermo::entropy(gaussian(mean, cov)); },
        py::arg("mean"), py::arg("cov"));

    m.def(
        "effective_rank",
        [](const std::vector<Matrix>& jacobians) { return capacity::effective_rank_of(jacobians).value; },
        py::arg("jacobians"));
    m.def(
        "compatible_effective_rank",
        [](const std::vector<Matrix>& jacobians, const Matrix& basis, double tau) {
            const capacity::CompatibleRank r =
                capacity::compatible_effective_rank_of(jacobians, spectral::SubspaceBasis(basis), tau);
            return py::make_tuple(r.rank.value, r.usable_direction_count);
        },
        py::arg("jacobians"), py::arg("basis"), py::arg("tau") = capacity::kDefaultUsableThreshold);
    m.def(
        "reconfiguration_dimension",
        [](const Matrix& hessian_b, const Matrix& basis) {
            const tasks::QuadraticTask b(hessian_b, Vector::Zero(hessian_b.rows()));
            return capacity::reconfiguration_dimension(b, spectral::SubspaceBasis(basis));
        },
        py::arg("hessian_b"), py::arg("basis"));
    m.def(
        "participation_ratio",
        [](const Matrix& samples) {
            std::vector<Vector> rows;
            rows.reserve(static_cast<std::size_t>(samples.rows()));
            for (Eigen::Index i = 0; i < samples.rows(); ++i) rows.emplace_back(samples.row(i).transpose());
            return capacity::participation_ratio(rows);
        },
        py::arg("samples"));
    m.def("spearman_correlation", [](const std::vector<double>& x, const std::vector<double>& y) {
        return capacity::spearman_correlation(x, y);
    });
}
