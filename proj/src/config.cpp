#include "transcap/config.hpp"

#include "transcap/errors.hpp"
#include "transcap/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace transcap::harness {

namespace {

using nlohmann::json;

// Walks one JSON object, pulling known keys and rejecting the rest.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) {
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected a JSON object");
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) {
            return;
        }
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field(key), std::string("invalid value: ") + e.what());
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    std::string field(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    void finish() const {
        for (const auto& [key, _] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError(field(key), "unknown key");
            }
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) {
        throw ConfigError(field, message);
    }
}

double max_of(const std::vector<double>& v, double fallback) {
    return v.empty() ? fallback : *std::max_element(v.begin(), v.end());
}

} // namespace

std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::esl_gap:
        return "esl-gap";
    case Scenario::rank_decay:
        return "rank-decay";
    case Scenario::threshold_sweep:
        return "threshold-sweep";
    case Scenario::composition_check:
        return "composition-check";
    case Scenario::proxy_probe:
        return "proxy-probe";
    }
    return "unknown";
}

Scenario scenario_from_string(std::string_view name) {
    for (Scenario s : kAllScenarios) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("scenario", "unknown scenario '" + std::string(name) + "'");
}

transport::StepRule RuleSettings::to_rule() const {
    transport::StepRule r;
    r.kind = kind;
    r.step_size = step_size;
    r.noise_scale = noise_scale;
    r.weight_decay = weight_decay;
    return r;
}

tasks::TaskPairSpec ExperimentConfig::pair_spec() const {
    tasks::TaskPairSpec spec = task_pair;
    spec.dim = dim;
    spec.k_a = k_a;
    if (spec.spectrum_b_on_a.empty()) {
        spec.spectrum_b_on_a.assign(static_cast<std::size_t>(k_a), 1.0);
    }
    return spec;
}

ExperimentConfig default_config(Scenario s) {
    ExperimentConfig cfg;
    cfg.scenario = s;
    cfg.output_dir = "transcap-output/" + std::string(to_string(s));
    cfg.task_pair.spectrum_b_on_a.clear();
    switch (s) {
    case Scenario::esl_gap:
        cfg.dim = 2;
        cfg.k_a = 1;
        cfg.rule = {transport::StepKind::langevin, 0.01, 1.0, 0.0};
        cfg.n_steps = 500;
        cfg.n_realizations = 1;
        break;
    case Scenario::rank_decay:
        cfg.rule = {transport::StepKind::gradient_descent, 0.1, 0.0, 0.1};
        cfg.n_steps = 200;
        break;
    case Scenario::threshold_sweep:
        cfg.rule = {transport::StepKind::gradient_descent, 0.05, 0.0, 0.0};
        cfg.n_steps = 0;
        cfg.n_realizations = 1;
        cfg.task_pair.normal_spectrum_a.assign(8, 0.04);
        cfg.task_pair.b_offset = 0.05;
        cfg.task_pair.exit_coupling = 0.03;
        break;
    case Scenario::composition_check:
        cfg.rule = {transport::StepKind::gradient_descent, 0.1, 0.0, 0.0};
        cfg.n_steps = 0;
        cfg.n_realizations = 1;
        break;
    case Scenario::proxy_probe:
        cfg.rule = {transport::StepKind::gradient_descent, 0.1, 0.0, 0.5};
        cfg.n_steps = 1200;
        cfg.n_realizations = 1;
        break;
    }
    return cfg;
}

ExperimentConfig config_from_json(const json& doc) {
    Section root(doc, "");
    std::string scenario_name;
    root.read("scenario", scenario_name);
    require(!scenario_name.empty(), "scenario", "missing scenario");
    ExperimentConfig cfg = default_config(scenario_from_string(scenario_name));

    root.read("dim", cfg.dim);
    root.read("k_a", cfg.k_a);
    root.read("n_steps", cfg.n_steps);
    root.read("n_realizations", cfg.n_realizations);
    root.read("master_seed", cfg.master_seed);
    root.read("initial_std", cfg.initial_std);
    root.read("output_dir", cfg.output_dir);

    if (const json* r = root.child("rule")) {
        Section sec(*r, "rule");
        std::string kind(transport::to_string(cfg.rule.kind));
        sec.read("kind", kind);
        try {
            cfg.rule.kind = transport::step_kind_from_string(kind);
        } catch (const InvalidArgument& e) {
            throw ConfigError("rule.kind", e.what());
        }
        sec.read("step_size", cfg.rule.step_size);
        sec.read("noise_scale", cfg.rule.noise_scale);
        sec.read("weight_decay", cfg.rule.weight_decay);
        sec.finish();
    }
    if (const json* t = root.child("task_pair")) {
        require(!t->contains("dim") && !t->contains("k_a"), "task_pair",
                "dim and k_a are set at the top level");
        Section sec(*t, "task_pair");
        sec.read("spectrum_b_on_a", cfg.task_pair.spectrum_b_on_a);
        sec.read("normal_spectrum_a", cfg.task_pair.normal_spectrum_a);
        sec.read("rotation_seed", cfg.task_pair.rotation_seed);
        sec.read("shared_minimizer", cfg.task_pair.shared_minimizer);
        sec.read("b_offset", cfg.task_pair.b_offset);
        sec.read("exit_coupling", cfg.task_pair.exit_coupling);
        sec.finish();
    }
    if (const json* t = root.child("thresholds")) {
        Section sec(*t, "thresholds");
        sec.read("tau_sigma", cfg.thresholds.tau_sigma);
        sec.read("eps_a", cfg.thresholds.eps_a);
        sec.read("eps_b", cfg.thresholds.eps_b);
        sec.read("eps_low", cfg.thresholds.eps_low);
        sec.read("eps_high", cfg.thresholds.eps_high);
        sec.finish();
    }
    if (const json* e = root.child("esl")) {
        Section sec(*e, "esl");
        sec.read("hessian_spectrum", cfg.esl.hessian_spectrum);
        sec.read("rotation_seed", cfg.esl.rotation_seed);
        sec.read("initial_mean", cfg.esl.initial_mean);
        sec.read("initial_variance", cfg.esl.initial_variance);
        sec.read("interpolation_steps", cfg.esl.interpolation_steps);
        sec.read("refinement_steps", cfg.esl.refinement_steps);
        sec.finish();
    }
    if (const json* s = root.child("sweep")) {
        Section sec(*s, "sweep");
        sec.read("m_b_targets", cfg.sweep.m_b_targets);
        sec.read("usable_targets", cfg.sweep.usable_targets);
        sec.read("phase1_weight_decay", cfg.sweep.phase1_weight_decay);
        sec.read("phase2_step_size", cfg.sweep.phase2_step_size);
        sec.read("phase2_max_steps", cfg.sweep.phase2_max_steps);
        sec.finish();
    }
    if (const json* c = root.child("composition")) {
        Section sec(*c, "composition");
        sec.read("n_trials", cfg.composition.n_trials);
        sec.read("max_steps", cfg.composition.max_steps);
        sec.read("n_matrix_pairs", cfg.composition.n_matrix_pairs);
        sec.read("max_pair_dim", cfg.composition.max_pair_dim);
        sec.finish();
    }
    if (const json* p = root.child("proxy")) {
        Section sec(*p, "proxy");
        sec.read("checkpoint_every", cfg.proxy.checkpoint_every);
        sec.read("gradient_samples", cfg.proxy.gradient_samples);
        sec.read("gradient_noise", cfg.proxy.gradient_noise);
        sec.read("decay_profile", cfg.proxy.decay_profile);
        sec.finish();
    }
    root.finish();
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json tp = cfg.task_pair;
    tp.erase("dim");
    tp.erase("k_a");
    return json{
        {"scenario", std::string(to_string(cfg.scenario))},
        {"dim", cfg.dim},
        {"k_a", cfg.k_a},
        {"rule",
         {{"kind", std::string(transport::to_string(cfg.rule.kind))},
          {"step_size", cfg.rule.step_size},
          {"noise_scale", cfg.rule.noise_scale},
          {"weight_decay", cfg.rule.weight_decay}}},
        {"n_steps", cfg.n_steps},
        {"n_realizations", cfg.n_realizations},
        {"master_seed", cfg.master_seed},
        {"initial_std", cfg.initial_std},
        {"task_pair", tp},
        {"thresholds",
         {{"tau_sigma", cfg.thresholds.tau_sigma},
          {"eps_a", cfg.thresholds.eps_a},
          {"eps_b", cfg.thresholds.eps_b},
          {"eps_low", cfg.thresholds.eps_low},
          {"eps_high", cfg.thresholds.eps_high}}},
        {"esl",
         {{"hessian_spectrum", cfg.esl.hessian_spectrum},
          {"rotation_seed", cfg.esl.rotation_seed},
          {"initial_mean", cfg.esl.initial_mean},
          {"initial_variance", cfg.esl.initial_variance},
          {"interpolation_steps", cfg.esl.interpolation_steps},
          {"refinement_steps", cfg.esl.refinement_steps}}},
        {"sweep",
         {{"m_b_targets", cfg.sweep.m_b_targets},
          {"usable_targets", cfg.sweep.usable_targets},
          {"phase1_weight_decay", cfg.sweep.phase1_weight_decay},
          {"phase2_step_size", cfg.sweep.phase2_step_size},
          {"phase2_max_steps", cfg.sweep.phase2_max_steps}}},
        {"composition",
         {{"n_trials", cfg.composition.n_trials},
          {"max_steps", cfg.composition.max_steps},
          {"n_matrix_pairs", cfg.composition.n_matrix_pairs},
          {"max_pair_dim", cfg.composition.max_pair_dim}}},
        {"proxy",
         {{"checkpoint_every", cfg.proxy.checkpoint_every},
          {"gradient_samples", cfg.proxy.gradient_samples},
          {"gradient_noise", cfg.proxy.gradient_noise},
          {"decay_profile", cfg.proxy.decay_profile}}},
        {"output_dir", cfg.output_dir},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", "cannot open config file '" + path.string() + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(doc);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write config file '" + path.string() + "'");
    }
    out << config_to_json(cfg).dump(2) << '\n';
}

void validate(const ExperimentConfig& cfg) {
    const Thresholds& th = cfg.thresholds;
    require(th.tau_sigma > 0.0 && th.tau_sigma < 1.0, "thresholds.tau_sigma", "must be in (0, 1)");
    require(th.eps_a > 0.0, "thresholds.eps_a", "must be > 0");
    require(th.eps_b > 0.0, "thresholds.eps_b", "must be > 0");
    require(th.eps_low > 0.0, "thresholds.eps_low", "must be > 0");
    require(th.eps_high > th.eps_low, "thresholds.eps_high", "must exceed eps_low");
    require(cfg.rule.step_size > 0.0 && std::isfinite(cfg.rule.step_size), "rule.step_size",
            "must be > 0");
    require(cfg.rule.noise_scale >= 0.0, "rule.noise_scale", "must be >= 0");
    require(cfg.rule.weight_decay >= 0.0, "rule.weight_decay", "must be >= 0");
    require(cfg.n_steps >= 0 && cfg.n_steps <= 100000, "n_steps", "must be in [0, 100000]");
    require(cfg.n_realizations >= 1 && cfg.n_realizations <= 100000, "n_realizations",
            "must be in [1, 100000]");
    require(cfg.initial_std >= 0.0, "initial_std", "must be >= 0");
    require(!cfg.output_dir.empty(), "output_dir", "must not be empty");

    const double eta = cfg.rule.step_size;

    if (cfg.scenario == Scenario::esl_gap) {
        const EslSettings& e = cfg.esl;
        require(cfg.rule.kind == transport::StepKind::langevin, "rule.kind",
                "esl-gap needs a LANGEVIN rule");
        require(cfg.rule.noise_scale > 0.0, "rule.noise_scale",
                "esl-gap needs temperature noise_scale > 0");
        require(!e.hessian_spectrum.empty(), "esl.hessian_spectrum", "must not be empty");
        for (double v : e.hessian_spectrum) {
            require(v > 0.0 && std::isfinite(v), "esl.hessian_spectrum", "entries must be > 0");
        }
        require(e.initial_mean.size() == e.hessian_spectrum.size(), "esl.initial_mean",
                "must have one entry per Hessian eigenvalue");
        require(e.initial_variance > 0.0, "esl.initial_variance", "must be > 0");
        require(e.interpolation_steps >= 1, "esl.interpolation_steps", "must be >= 1");
        for (int n : e.refinement_steps) {
            require(n >= 1, "esl.refinement_steps", "entries must be >= 1");
        }
        const double lmax = max_of(e.hessian_spectrum, 0.0) + cfg.rule.weight_decay;
        require(eta * lmax < 2.0, "rule.step_size",
                "unstable: step_size * lambda_max = " + std::to_string(eta * lmax) + " >= 2");
        return;
    }

    require(cfg.dim >= 2 && cfg.dim <= 256, "dim", "must be in [2, 256]");
    if (cfg.scenario == Scenario::composition_check) {
        const CompositionSettings& c = cfg.composition;
        require(c.n_trials >= 1, "composition.n_trials", "must be >= 1");
        require(c.max_steps >= 0, "composition.max_steps", "must be >= 0");
        require(c.n_matrix_pairs >= 0, "composition.n_matrix_pairs", "must be >= 0");
        require(c.max_pair_dim >= 2 && c.max_pair_dim <= 256, "composition.max_pair_dim",
                "must be in [2, 256]");
        return;
    }

    require(cfg.k_a >= 1 && cfg.k_a < cfg.dim, "k_a", "must satisfy 1 <= k_a < dim");
    const tasks::TaskPairSpec spec = cfg.pair_spec();
    require(static_cast<int>(spec.spectrum_b_on_a.size()) == cfg.k_a, "task_pair.spectrum_b_on_a",
            "must have k_a entries");
    for (double v : spec.spectrum_b_on_a) {
        require(v >= 0.0 && std::isfinite(v), "task_pair.spectrum_b_on_a", "entries must be >= 0");
    }
    require(spec.normal_spectrum_a.empty() ||
                static_cast<int>(spec.normal_spectrum_a.size()) == cfg.dim - cfg.k_a,
            "task_pair.normal_spectrum_a", "must have dim - k_a entries");
    for (double v : spec.normal_spectrum_a) {
        require(v > 0.0 && std::isfinite(v), "task_pair.normal_spectrum_a", "entries must be > 0");
    }
    require(spec.shared_minimizer.empty() ||
                static_cast<int>(spec.shared_minimizer.size()) == cfg.dim,
            "task_pair.shared_minimizer", "must have dim entries");
    const double lambda_a = max_of(spec.normal_spectrum_a, 2.0);

    if (cfg.scenario == Scenario::rank_decay || cfg.scenario == Scenario::proxy_probe) {
        double decay = cfg.rule.weight_decay;
        if (cfg.scenario == Scenario::proxy_probe) {
            const ProxySettings& p = cfg.proxy;
            require(p.checkpoint_every >= 1, "proxy.checkpoint_every", "must be >= 1");
            require(p.gradient_samples == 0 || p.gradient_samples >= 2, "proxy.gradient_samples",
                    "must be 0 (auto) or >= 2");
            require(p.gradient_noise > 0.0, "proxy.gradient_noise", "must be > 0");
            require(p.decay_profile.empty() ||
                        static_cast<int>(p.decay_profile.size()) == cfg.k_a,
                    "proxy.decay_profile", "must have k_a entries");
            for (double v : p.decay_profile) {
                require(v >= 0.0 && std::isfinite(v), "proxy.decay_profile", "entries must be >= 0");
            }
            decay *= max_of(p.decay_profile, 1.0);
        }
        const double lmax = std::max(lambda_a, decay) + (cfg.scenario == Scenario::rank_decay ? decay : 0.0);
        require(eta * lmax < 2.0, "rule.step_size",
                "unstable: step_size * lambda_max = " + std::to_string(eta * lmax) + " >= 2");
        return;
    }

    // threshold-sweep
    const SweepSettings& s = cfg.sweep;
    require(!s.m_b_targets.empty(), "sweep.m_b_targets", "must not be empty");
    require(!s.usable_targets.empty(), "sweep.usable_targets", "must not be empty");
    for (int m : s.m_b_targets) {
        require(m >= 0 && m <= cfg.k_a, "sweep.m_b_targets", "entries must be in [0, k_a]");
    }
    for (int u : s.usable_targets) {
        require(u >= 0 && u <= cfg.k_a, "sweep.usable_targets", "entries must be in [0, k_a]");
    }
    require(cfg.rule.kind == transport::StepKind::gradient_descent, "rule.kind",
            "threshold-sweep phases are GRADIENT_DESCENT");
    require(cfg.rule.weight_decay == 0.0, "rule.weight_decay",
            "threshold-sweep decay is set by sweep.phase1_weight_decay");
    require(s.phase1_weight_decay > 0.0, "sweep.phase1_weight_decay", "must be > 0");
    require(eta * s.phase1_weight_decay < 1.0, "sweep.phase1_weight_decay",
            "step_size * phase1_weight_decay must be < 1 for geometric collapse");
    require(eta * (lambda_a + cfg.rule.weight_decay) < 2.0, "rule.step_size",
            "unstable: step_size * lambda_max(H_A) >= 2");
    require(s.phase2_step_size > 0.0, "sweep.phase2_step_size", "must be > 0");
    require(s.phase2_max_steps >= 1, "sweep.phase2_max_steps", "must be >= 1");
    // Phase 2 preconditioner J J^T has norm <= 1, so lambda_max(G H_B) <= lambda_max(H_B).
    const double beta = spec.exit_coupling;
    const double lambda_b = max_of(spec.spectrum_b_on_a, 0.0) * (1.0 + beta * beta);
    require(s.phase2_step_size * lambda_b < 2.0, "sweep.phase2_step_size",
            "unstable: phase2_step_size * lambda_max(H_B) = " +
                std::to_string(s.phase2_step_size * lambda_b) + " >= 2");
}

std::string config_hash(const ExperimentConfig& cfg) {
    return sha256_hex(config_to_json(cfg).dump());
}

} // namespace transcap::harness
