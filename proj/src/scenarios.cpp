#include "transcap/scenarios.hpp"

#include "transcap/capacity.hpp"
#include "transcap/errors.hpp"
#include "transcap/parallel.hpp"
#include "transcap/rng.hpp"
#include "transcap/spectral.hpp"
#include "transcap/tasks.hpp"
#include "transcap/thermo.hpp"
#include "transcap/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>

namespace transcap::harness {

namespace {

using spectral::SubspaceBasis;
using thermo::GaussianState;
using transport::StepKind;
using transport::StepRule;
using transport::Trajectory;

constexpr const char* kThermoUnits =
    "sigma_k = eta * E||v||^2 / T per step (dimensionless); time = step * eta; "
    "D = duration * T * sum(sigma) / 2 has units of W2^2; esl_slack = D - W2^2 / 2";
constexpr const char* kRankUnits =
    "effective ranks are exp(mean log det(J^T J) / dim); singular values are dimensionless";

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

std::vector<double> ones_then_zeros(int ones, int total) {
    std::vector<double> v(static_cast<std::size_t>(total), 0.0);
    std::fill_n(v.begin(), ones, 1.0);
    return v;
}

Vector starting_point(const Vector& center, double spread, std::uint64_t master,
                      std::uint64_t realization) {
    if (spread <= 0.0) {
        return center;
    }
    const auto d = center.size();
    const GaussianState q0(center, spread * spread * Matrix::Identity(d, d));
    return transport::ensemble_initial_state(q0, master, realization);
}

double max_step_singular_value(const StepRule& rule, const tasks::QuadraticTask& task) {
    return spectral::singular_values(rule.step_jacobian(task))(0);
}

} // namespace

// ---------------------------------------------------------------- esl-gap

ScenarioResult run_esl_gap(const ExperimentConfig& cfg, std::size_t) {
    const EslSettings& e = cfg.esl;
    const auto d = static_cast<Eigen::Index>(e.hessian_spectrum.size());
    const Vector spectrum = Eigen::Map<const Vector>(e.hessian_spectrum.data(), d);
    const Matrix rot = rng::random_orthogonal(d, e.rotation_seed);
    const tasks::QuadraticTask task(rot * spectrum.asDiagonal() * rot.transpose(), Vector::Zero(d),
                                    "esl");
    const StepRule rule = cfg.rule.to_rule();
    const double temp = rule.noise_scale;
    const double eta = rule.step_size;

    const GaussianState g0(Eigen::Map<const Vector>(e.initial_mean.data(), d),
                           e.initial_variance * Matrix::Identity(d, d));
    const thermo::Relaxation relax = thermo::relax(g0, task, rule, cfg.n_steps);
    const GaussianState& g_end = relax.states.back();
    const double duration = cfg.n_steps * eta;
    const double w_total = thermo::w2_gaussian(g0, g_end);
    const double half_w2 = 0.5 * w_total * w_total;

    // Free energy along the geodesic uses the same (decay-shifted) potential as the relaxation.
    const tasks::QuadraticTask eff = thermo::effective_task(task, rule);
    const auto geodesic = thermo::ot_geodesic(g0, g_end, e.interpolation_steps);
    const thermo::DissipationLedger geo = thermo::path_ledger(geodesic, eff, temp, duration);

    const double lang_slack = thermo::esl_slack(relax.ledger, g0, g_end);
    const double geo_slack = thermo::esl_slack(geo, g0, g_end);

    ScenarioResult out;
    const std::vector<std::string> cols{"step",   "time",        "sigma",        "cumulative_sigma",
                                        "free_energy", "excess_increment", "w2_from_start"};
    auto fill = [&](Table& t, const std::vector<GaussianState>& states,
                    const thermo::DissipationLedger& ledger, double dt) {
        double cum = 0.0;
        t.add_row({std::int64_t{0}, 0.0, 0.0, 0.0, ledger.free_energy_series[0], 0.0, 0.0});
        for (std::size_t k = 0; k < ledger.per_step_sigma.size(); ++k) {
            const double s = ledger.per_step_sigma[k];
            cum += s;
            const double inc =
                s - (ledger.free_energy_series[k] - ledger.free_energy_series[k + 1]) / temp;
            t.add_row({static_cast<std::int64_t>(k + 1), static_cast<double>(k + 1) * dt, s, cum,
                       ledger.free_energy_series[k + 1], inc,
                       thermo::w2_gaussian(g0, states[k + 1])});
        }
    };
    Table lang("langevin", cols, kThermoUnits);
    fill(lang, relax.states, relax.ledger, eta);
    Table geo_table("geodesic", cols, kThermoUnits);
    fill(geo_table, geodesic, geo,
         e.interpolation_steps > 0 ? duration / e.interpolation_steps : 0.0);

    Table refine("geodesic_refinement",
                 {"interpolation_steps", "total_sigma", "excess", "esl_slack", "slack_fraction"},
                 kThermoUnits);
    std::vector<int> steps = e.refinement_steps;
    std::sort(steps.begin(), steps.end());
    std::vector<double> refine_slack;
    for (int n : steps) {
        const auto path = thermo::ot_geodesic(g0, g_end, n);
        const thermo::DissipationLedger l = thermo::path_ledger(path, eff, temp, duration);
        const double s = thermo::esl_slack(l, g0, g_end);
        refine_slack.push_back(s);
        refine.add_row({static_cast<std::int64_t>(n), l.total, l.excess, s,
                        half_w2 > 0.0 ? s / half_w2 : 0.0});
    }

    // Contract checks.
    const bool anisotropic = spectrum.maxCoeff() > spectrum.minCoeff();
    auto& v = out.violations;
    if (lang_slack < -1e-6) {
        v.push_back(fmt("esl-gap: Langevin esl_slack %.6g < -1e-6", lang_slack));
    }
    if (relax.ledger.excess < -1e-6) {
        v.push_back(fmt("esl-gap: Langevin excess dissipation %.6g < -1e-6", relax.ledger.excess));
    }
    if (geo_slack > 0.05 * half_w2 + 1e-12) {
        v.push_back(fmt("esl-gap: geodesic slack %.6g exceeds 5%% of W2^2/2 = %.6g", geo_slack,
                        half_w2));
    }
    for (std::size_t i = 1; i < refine_slack.size(); ++i) {
        if (refine_slack[i] > refine_slack[i - 1] + 1e-9 * std::max(1.0, half_w2)) {
            v.push_back(fmt("esl-gap: geodesic slack grew under refinement (%.6g -> %.6g)",
                            refine_slack[i - 1], refine_slack[i]));
        }
    }
    if (anisotropic && w_total > 0.0 && !(lang_slack > geo_slack)) {
        v.push_back(fmt("esl-gap: Langevin slack %.6g does not exceed geodesic slack %.6g",
                        lang_slack, geo_slack));
    }
    const auto& f = relax.ledger.free_energy_series;
    const double f_tol = 10.0 * eta * eta * std::max(1.0, std::abs(f.front()));
    double max_rise = 0.0;
    for (std::size_t k = 1; k < f.size(); ++k) {
        max_rise = std::max(max_rise, f[k] - f[k - 1]);
    }
    if (max_rise > f_tol) {
        v.push_back(fmt("esl-gap: free energy rose by %.6g in one step (tolerance %.6g)", max_rise,
                        f_tol));
    }

    out.summary = {
        {"w2_endpoints", w_total},
        {"half_w2_squared", half_w2},
        {"duration", duration},
        {"temperature", temp},
        {"langevin",
         {{"total_sigma", relax.ledger.total},
          {"excess", relax.ledger.excess},
          {"free_energy_drop", f.front() - f.back()},
          {"speed_limit_dissipation", relax.ledger.speed_limit_dissipation()},
          {"esl_slack", lang_slack},
          {"max_free_energy_rise", max_rise}}},
        {"geodesic",
         {{"interpolation_steps", e.interpolation_steps},
          {"total_sigma", geo.total},
          {"excess", geo.excess},
          {"speed_limit_dissipation", geo.speed_limit_dissipation()},
          {"esl_slack", geo_slack}}},
        {"anisotropic", anisotropic},
    };
    out.tables.push_back(std::move(lang));
    out.tables.push_back(std::move(geo_table));
    out.tables.push_back(std::move(refine));
    return out;
}

// ---------------------------------------------------------------- rank-decay

ScenarioResult run_rank_decay(const ExperimentConfig& cfg, std::size_t workers) {
    const tasks::TaskPair pair = tasks::make_task_pair(cfg.pair_spec());
    const tasks::QuadraticTask& task = pair.task_a;
    const SubspaceBasis& q_a = pair.preserving_basis;
    const Eigen::Index d = task.dim();
    const Eigen::Index k = q_a.dim();
    const StepRule rule = cfg.rule.to_rule();
    const int n_steps = cfg.n_steps;
    const auto n_real = static_cast<std::size_t>(cfg.n_realizations);
    const auto n_rows = static_cast<std::size_t>(n_steps) + 1;
    const double tau = cfg.thresholds.tau_sigma;

    struct Record {
        std::vector<double> log_volume;
        std::vector<double> compatible_log_volume;
        std::vector<Vector> compatible_sigma;
        std::vector<int> numerical_rank;
        double final_loss = 0.0;
    };
    std::vector<Record> rec(n_real);

    parallel_for(n_real, workers, [&](std::size_t r) {
        Record& out = rec[r];
        out.log_volume.reserve(n_rows);
        out.compatible_log_volume.reserve(n_rows);
        out.compatible_sigma.reserve(n_rows);
        out.numerical_rank.reserve(n_rows);
        transport::PropagateOptions opts;
        opts.realization = r;
        opts.keep_step_jacobians = false;
        opts.observer = [&](int, const Vector&, const Matrix& j) {
            const Matrix jq = j * q_a.basis();
            out.log_volume.push_back(spectral::log_gram_volume(j));
            out.compatible_log_volume.push_back(spectral::log_gram_volume(jq));
            out.compatible_sigma.push_back(spectral::singular_values(jq));
            out.numerical_rank.push_back(spectral::numerical_rank(j));
        };
        const Vector theta0 = starting_point(task.minimizer(), cfg.initial_std, cfg.master_seed, r);
        const Trajectory t =
            transport::propagate(theta0, task, rule, n_steps, cfg.master_seed, opts);
        out.final_loss = task.value(t.final_state());
    });

    std::vector<std::string> cols{"step",
                                  "effective_rank",
                                  "compatible_effective_rank",
                                  "usable_direction_count",
                                  "numerical_rank",
                                  "expected_compatible_sigma"};
    for (Eigen::Index i = 0; i < k; ++i) {
        cols.push_back("sigma_" + std::to_string(i + 1));
    }
    Table table("rank_decay", cols, kRankUnits);

    const double contraction = 1.0 - rule.step_size * rule.weight_decay;
    const bool hypothesis = max_step_singular_value(rule, task) <= 1.0 + 1e-12;
    ScenarioResult out;
    auto& v = out.violations;
    double prev_ra = std::numeric_limits<double>::infinity();
    int prev_count = std::numeric_limits<int>::max();
    int prev_rank = std::numeric_limits<int>::max();
    double max_profile_error = 0.0;
    double max_ra_deviation = 0.0;
    int monotonicity_breaks = 0;
    std::vector<double> lv(n_real);
    std::vector<double> lva(n_real);
    for (std::size_t t = 0; t < n_rows; ++t) {
        Vector profile = Vector::Zero(k);
        double usable = 0.0;
        int max_rank = 0;
        for (std::size_t r = 0; r < n_real; ++r) {
            lv[r] = rec[r].log_volume[t];
            lva[r] = rec[r].compatible_log_volume[t];
            profile += rec[r].compatible_sigma[t];
            usable += static_cast<double>((rec[r].compatible_sigma[t].array() > tau).count());
            max_rank = std::max(max_rank, rec[r].numerical_rank[t]);
        }
        profile /= static_cast<double>(n_real);
        const double big_r = capacity::summarize_log_volumes(lv, static_cast<double>(d)).value;
        const double ra = capacity::summarize_log_volumes(lva, static_cast<double>(k)).value;
        const int count = capacity::round_half_down(usable / static_cast<double>(n_real));
        const double expected = std::pow(contraction, static_cast<double>(t));

        std::vector<Cell> row{static_cast<std::int64_t>(t), big_r, ra,
                              static_cast<std::int64_t>(count), static_cast<std::int64_t>(max_rank),
                              expected};
        for (Eigen::Index i = 0; i < k; ++i) {
            row.emplace_back(profile(i));
            max_profile_error =
                std::max(max_profile_error, std::abs(profile(i) - expected) / std::max(expected, 1e-300));
        }
        table.add_row(row);

        if (max_rank > prev_rank) {
            v.push_back("rank-decay: numerical rank increased at step " + std::to_string(t));
        }
        if (ra > prev_ra + 1e-10 || count > prev_count) {
            ++monotonicity_breaks;
            if (hypothesis) {
                v.push_back("rank-decay: R_A or usable count increased at step " +
                            std::to_string(t));
            }
        }
        if (rule.weight_decay == 0.0) {
            max_ra_deviation = std::max(max_ra_deviation, std::abs(ra - 1.0));
        }
        prev_rank = max_rank;
        prev_ra = ra;
        prev_count = count;
    }
    if (rule.weight_decay == 0.0 && max_ra_deviation > 1e-12) {
        v.push_back(fmt("rank-decay: wd = 0 but R_A deviates from 1 by %.3g", max_ra_deviation));
    }
    if (rule.weight_decay > 0.0 && max_profile_error > 1e-8) {
        v.push_back(fmt("rank-decay: compatible singular values off (1 - eta wd)^t by %.3g "
                        "(relative)",
                        max_profile_error));
    }

    Table per_real("rank_decay_realizations",
                   {"realization", "log_volume", "compatible_log_volume", "final_loss_a"},
                   "log-volumes are log det(J^T J) and log det((J Q_A)^T J Q_A) at the final step");
    for (std::size_t r = 0; r < n_real; ++r) {
        per_real.add_row({static_cast<std::int64_t>(r), rec[r].log_volume.back(),
                          rec[r].compatible_log_volume.back(), rec[r].final_loss});
    }

    out.summary = {
        {"n_steps", n_steps},
        {"n_realizations", cfg.n_realizations},
        {"contraction_per_step", contraction},
        {"contraction_hypothesis_holds", hypothesis},
        {"monotonicity_breaks", monotonicity_breaks},
        {"max_profile_relative_error", rule.weight_decay > 0.0 ? max_profile_error : 0.0},
        {"max_compatible_rank_deviation_from_one", max_ra_deviation},
    };
    out.tables.push_back(std::move(table));
    out.tables.push_back(std::move(per_real));
    return out;
}

// ---------------------------------------------------------------- threshold-sweep

ScenarioResult run_threshold_sweep(const ExperimentConfig& cfg, std::size_t workers) {
    const SweepSettings& s = cfg.sweep;
    const Thresholds& th = cfg.thresholds;
    const int k = cfg.k_a;
    const double eta = cfg.rule.step_size;
    const int phase1_steps = static_cast<int>(
        std::ceil(std::log(th.tau_sigma) / std::log(1.0 - eta * s.phase1_weight_decay)));

    struct Cell {
        int usable_target = 0;
        int m_target = 0;
        capacity::CapacityReport report;
        capacity::ForgettingMeasurement forgetting;
        double b_loss = 0.0;
        int phase2_steps = 0;
        bool reached = false;
        bool observed_incompatible = false;
        bool observed_compatible = false;
        bool agree = false;
        std::string observed_class;
    };
    std::vector<Cell> cells;
    for (int u : s.usable_targets) {
        for (int m : s.m_b_targets) {
            Cell c;
            c.usable_target = u;
            c.m_target = m;
            cells.push_back(c);
        }
    }

    parallel_for(cells.size(), workers, [&](std::size_t i) {
        Cell& c = cells[i];
        tasks::TaskPairSpec spec = cfg.pair_spec();
        spec.spectrum_b_on_a = ones_then_zeros(c.m_target, k);
        const tasks::TaskPair pair = tasks::make_task_pair(spec);
        const SubspaceBasis& q_a = pair.preserving_basis;
        const Eigen::Index d = pair.task_a.dim();

        // Phase 1: train on A while decaying the trailing k - u compatible directions.
        StepRule p1;
        p1.kind = StepKind::gradient_descent;
        p1.step_size = eta;
        p1.weight_decay = s.phase1_weight_decay;
        if (c.usable_target < k) {
            const Matrix trail = q_a.columns(c.usable_target, k - c.usable_target).basis();
            p1.decay_shape = trail * trail.transpose();
        } else {
            p1.decay_shape = Matrix::Zero(d, d);
        }
        transport::PropagateOptions o1;
        o1.realization = i;
        o1.keep_step_jacobians = false;
        const Trajectory phase1 = transport::propagate(pair.task_a.minimizer(), pair.task_a, p1,
                                                       phase1_steps, cfg.master_seed, o1);
        c.report = capacity::predict_incompatibility(std::span<const Trajectory>(&phase1, 1), q_a,
                                                     pair.task_b, th.tau_sigma);

        // Phase 2: descend on B through the phase-1 map (pullback metric J J^T).
        const Vector& theta1 = phase1.final_state();
        StepRule p2;
        p2.kind = StepKind::gradient_descent;
        p2.step_size = s.phase2_step_size;
        p2.metric = phase1.cumulative_jacobian * phase1.cumulative_jacobian.transpose();
        transport::PropagateOptions o2;
        o2.realization = i;
        o2.start_step = phase1_steps;
        o2.keep_step_jacobians = false;
        o2.stop_when = [&](int, const Vector& theta) {
            return pair.task_b.value(theta) <= th.eps_b;
        };
        const int budget = pair.task_b.value(theta1) <= th.eps_b ? 0 : s.phase2_max_steps;
        const Trajectory phase2 =
            transport::propagate(theta1, pair.task_b, p2, budget, cfg.master_seed, o2);

        c.phase2_steps = phase2.n_steps();
        c.b_loss = pair.task_b.value(phase2.final_state());
        c.reached = c.b_loss <= th.eps_b;
        c.forgetting =
            capacity::measure_forgetting(theta1, phase2.final_state(), pair.task_a, th.eps_a);
        const double f = c.forgetting.forgetting;
        c.observed_incompatible = f >= th.eps_high;
        c.observed_compatible = c.reached && f <= th.eps_low;
        c.agree = c.report.predicted_incompatible ? c.observed_incompatible : c.observed_compatible;
        if (c.observed_incompatible) {
            c.observed_class = "incompatible";
        } else if (!c.reached) {
            c.observed_class = "unreached";
        } else if (c.observed_compatible) {
            c.observed_class = "compatible";
        } else {
            c.observed_class = "intermediate";
        }
    });

    Table table("threshold_sweep",
                {"cell", "usable_target", "m_b_target", "m_b", "usable_direction_count",
                 "compatible_effective_rank", "forgetting", "b_loss", "phase2_steps", "reached",
                 "predicted_incompatible", "raw_predicate", "observed_incompatible",
                 "observed_class", "agree", "bound_check"},
                "forgetting and b_loss are quadratic losses; counts are directions");
    ScenarioResult out;
    auto& v = out.violations;
    int agree = 0;
    int tp = 0;
    int fp = 0;
    int tn = 0;
    int fn = 0;
    int unreached = 0;
    double min_bound = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& c = cells[i];
        const auto& r = c.report;
        const double f = c.forgetting.forgetting;
        table.add_row({static_cast<std::int64_t>(i), static_cast<std::int64_t>(c.usable_target),
                       static_cast<std::int64_t>(c.m_target), r.m_b,
                       static_cast<std::int64_t>(r.usable_direction_count),
                       r.compatible_effective_rank, f, c.b_loss,
                       static_cast<std::int64_t>(c.phase2_steps), c.reached,
                       r.predicted_incompatible, r.raw_predicate, c.observed_incompatible,
                       c.observed_class, c.agree, c.forgetting.bound_check});
        agree += c.agree ? 1 : 0;
        unreached += c.reached ? 0 : 1;
        if (r.predicted_incompatible) {
            (c.observed_incompatible ? tp : fp) += 1;
        } else {
            (c.observed_compatible ? tn : fn) += 1;
        }
        min_bound = std::min(min_bound, c.forgetting.bound_check);

        const std::string where = "threshold-sweep: cell (usable " +
                                  std::to_string(c.usable_target) + ", m_B " +
                                  std::to_string(c.m_target) + ")";
        if (r.usable_direction_count != c.usable_target) {
            v.push_back(where + ": phase 1 produced usable count " +
                        std::to_string(r.usable_direction_count));
        }
        if (std::abs(r.m_b - c.m_target) > 1e-9) {
            v.push_back(where + fmt(": m_B = %.17g differs from target", r.m_b));
        }
        if (c.forgetting.bound_check < -1e-10) {
            v.push_back(where + fmt(": forgetting bound violated (%.3g)", c.forgetting.bound_check));
        }
        if (c.m_target == 0 && f > th.eps_low) {
            v.push_back(where + fmt(": forgetting %.3g > eps_low with m_B = 0", f));
        }
        if (r.usable_direction_count == 0 && c.m_target >= 1 && c.reached && f < th.eps_high) {
            v.push_back(where + fmt(": reached B with forgetting %.3g < eps_high", f));
        }
    }
    const double agreement = cells.empty() ? 1.0 : static_cast<double>(agree) / cells.size();
    if (agreement < 0.95) {
        v.push_back(fmt("threshold-sweep: prediction agreement %.4f < 0.95", agreement));
    }

    Table confusion("threshold_sweep_confusion", {"predicted", "observed", "cells"},
                    "cell counts");
    confusion.add_row({std::string("incompatible"), std::string("incompatible"), std::int64_t{tp}});
    confusion.add_row({std::string("incompatible"), std::string("not incompatible"), std::int64_t{fp}});
    confusion.add_row({std::string("compatible"), std::string("compatible"), std::int64_t{tn}});
    confusion.add_row({std::string("compatible"), std::string("not compatible"), std::int64_t{fn}});

    out.summary = {
        {"cells", cells.size()},
        {"agreement", agreement},
        {"phase1_steps", phase1_steps},
        {"phase1_compatible_sigma",
         std::pow(1.0 - eta * s.phase1_weight_decay, phase1_steps)},
        {"unreached_cells", unreached},
        {"min_bound_check", min_bound},
        {"confusion",
         {{"predicted_incompatible_observed_incompatible", tp},
          {"predicted_incompatible_observed_other", fp},
          {"predicted_compatible_observed_compatible", tn},
          {"predicted_compatible_observed_other", fn}}},
        {"eps_low", th.eps_low},
        {"eps_high", th.eps_high},
        {"eps_b", th.eps_b},
    };
    out.tables.push_back(std::move(table));
    out.tables.push_back(std::move(confusion));
    return out;
}

// ---------------------------------------------------------------- composition-check

namespace {

struct TrialOutcome {
    std::string kind;
    int n_steps = 0;
    int split = 0;
    double step_size = 0.0;
    double weight_decay = 0.0;
    bool collapse = false;
    double relative_error = 0.0;
    double state_error = 0.0;
    int rank_violations = 0;
    double noise_independence_error = 0.0;
};

double relative_frobenius(const Matrix& a, const Matrix& b) {
    const double diff = (a - b).norm();
    const double scale = b.norm();
    if (diff == 0.0) {
        return 0.0;
    }
    return scale > 0.0 ? diff / scale : std::numeric_limits<double>::infinity();
}

TrialOutcome composition_trial(const ExperimentConfig& cfg, std::size_t trial) {
    const CompositionSettings& c = cfg.composition;
    const auto d = static_cast<Eigen::Index>(cfg.dim);
    rng::CounterRng gen(cfg.master_seed, trial, 0, rng::Stream::trial);

    Vector eig(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        eig(i) = gen.uniform() < 0.25 ? 0.0 : 0.05 + 1.95 * gen.uniform();
    }
    const Matrix rot = rng::random_orthogonal(d, gen.next_u64());
    const tasks::QuadraticTask task(rot * eig.asDiagonal() * rot.transpose(),
                                    gen.normal_vector(d), "trial");

    TrialOutcome out;
    StepRule rule;
    const std::uint64_t pick = gen.next_u64() % 3;
    rule.kind = pick == 0 ? StepKind::gradient_descent
                          : (pick == 1 ? StepKind::noisy_gradient : StepKind::langevin);
    rule.weight_decay = gen.uniform() < 0.5 ? 0.0 : 0.5 * gen.uniform();
    rule.noise_scale = rule.kind == StepKind::gradient_descent ? 0.0 : 0.1 + 0.9 * gen.uniform();
    const double lmax = eig.maxCoeff() + rule.weight_decay;
    out.collapse = gen.uniform() < 0.2 && lmax > 0.0;
    if (out.collapse) {
        // eta * (lambda_j + wd) = 1 for a random eigenvalue: that direction is annihilated.
        const Eigen::Index j = static_cast<Eigen::Index>(gen.next_u64() % static_cast<std::uint64_t>(d));
        const double lam = eig(j) + rule.weight_decay > 0.0 ? eig(j) + rule.weight_decay : lmax;
        rule.step_size = 1.0 / lam;
        if (rule.step_size * lmax > 2.0) {
            rule.step_size = 1.0 / lmax;
        }
    } else {
        rule.step_size = (0.05 + 1.9 * gen.uniform()) / std::max(lmax, 1.0);
    }

    const int n = trial == 0 ? 0 : static_cast<int>(gen.next_u64() % static_cast<std::uint64_t>(c.max_steps + 1));
    const int split = n == 0 ? 0 : static_cast<int>(gen.next_u64() % static_cast<std::uint64_t>(n + 1));
    const Vector theta0 = task.minimizer() + gen.normal_vector(d);
    const std::uint64_t omega = gen.next_u64();

    out.kind = std::string(transport::to_string(rule.kind));
    out.n_steps = n;
    out.split = split;
    out.step_size = rule.step_size;
    out.weight_decay = rule.weight_decay;

    transport::PropagateOptions direct_opts;
    direct_opts.realization = trial;
    direct_opts.keep_step_jacobians = false;
    int prev_rank = static_cast<int>(d);
    direct_opts.observer = [&](int, const Vector&, const Matrix& j) {
        const int r = spectral::numerical_rank(j);
        if (r > prev_rank) {
            ++out.rank_violations;
        }
        prev_rank = r;
    };
    const Trajectory direct = transport::propagate(theta0, task, rule, n, omega, direct_opts);

    transport::PropagateOptions first_opts;
    first_opts.realization = trial;
    first_opts.keep_step_jacobians = false;
    const Trajectory first = transport::propagate(theta0, task, rule, split, omega, first_opts);
    transport::PropagateOptions second_opts = first_opts;
    second_opts.start_step = split;
    const Trajectory second =
        transport::propagate(first.final_state(), task, rule, n - split, omega, second_opts);
    const Trajectory composed = transport::compose(first, second);

    out.relative_error = relative_frobenius(composed.cumulative_jacobian, direct.cumulative_jacobian);
    const double scale = std::max(1.0, direct.final_state().cwiseAbs().maxCoeff());
    out.state_error = (composed.final_state() - direct.final_state()).cwiseAbs().maxCoeff() / scale;

    StepRule deterministic = rule;
    deterministic.kind = StepKind::gradient_descent;
    deterministic.noise_scale = 0.0;
    const Trajectory gd = transport::propagate(theta0, task, deterministic, n, omega, first_opts);
    out.noise_independence_error =
        relative_frobenius(gd.cumulative_jacobian, direct.cumulative_jacobian);
    return out;
}

struct PairOutcome {
    std::string kind;
    Eigen::Index rows = 0;
    Eigen::Index inner = 0;
    Eigen::Index cols = 0;
    int rank_a = 0;
    int rank_b = 0;
    int rank_ab = 0;
    bool rank_violation = false;
    int sv_violations = 0;
    double max_sv_excess = 0.0;
};

PairOutcome matrix_pair(const ExperimentConfig& cfg, std::size_t index) {
    const int max_dim = cfg.composition.max_pair_dim;
    rng::CounterRng gen(cfg.master_seed, index, 1, rng::Stream::trial);
    auto dim = [&] { return static_cast<Eigen::Index>(2 + gen.next_u64() % static_cast<std::uint64_t>(max_dim - 1)); };
    auto small_int = [&] { return static_cast<double>(static_cast<int>(gen.next_u64() % 7) - 3); };

    PairOutcome out;
    Matrix a;
    Matrix b;
    double rank_tol = spectral::kRankTolerance;
    if (index % 2 == 0) {
        // Integer factors give exact low ranks; numerical rank uses a looser cutoff.
        out.kind = "integer";
        out.rows = dim();
        out.inner = dim();
        out.cols = dim();
        auto low_rank = [&](Eigen::Index r, Eigen::Index c) {
            const Eigen::Index rank =
                1 + static_cast<Eigen::Index>(gen.next_u64() % static_cast<std::uint64_t>(std::min(r, c)));
            const Matrix u = Matrix::NullaryExpr(r, rank, [&] { return small_int(); });
            const Matrix w = Matrix::NullaryExpr(rank, c, [&] { return small_int(); });
            return Matrix(u * w);
        };
        a = low_rank(out.rows, out.inner);
        b = low_rank(out.inner, out.cols);
        rank_tol = 1e-9;
    } else {
        out.kind = "gaussian";
        out.rows = out.inner = out.cols = dim();
        a = Matrix::NullaryExpr(out.rows, out.inner, [&] { return gen.normal(); });
        b = Matrix::NullaryExpr(out.inner, out.cols, [&] { return gen.normal(); });
    }
    const Matrix ab = a * b;
    out.rank_a = spectral::numerical_rank(a, rank_tol);
    out.rank_b = spectral::numerical_rank(b, rank_tol);
    out.rank_ab = spectral::numerical_rank(ab, rank_tol);
    out.rank_violation = out.rank_ab > std::min(out.rank_a, out.rank_b);

    const Vector sa = spectral::singular_values(a);
    const Vector sb = spectral::singular_values(b);
    const Vector sab = spectral::singular_values(ab);
    const double tol = 1e-12 * sa(0) * sb(0);
    auto check = [&](double excess) {
        out.max_sv_excess = std::max(out.max_sv_excess, excess);
        if (excess > tol) {
            ++out.sv_violations;
        }
    };
    for (Eigen::Index i = 0; i < sab.size(); ++i) {
        if (i < sa.size()) {
            check(sab(i) - sa(i) * sb(0));
        }
        if (i < sb.size()) {
            check(sab(i) - sa(0) * sb(i));
        }
    }
    if (a.rows() == a.cols() && b.rows() == b.cols()) {
        const Eigen::Index n = a.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            check(sa(i) * sb(n - 1) - sab(i));
        }
    }
    return out;
}

} // namespace

ScenarioResult run_composition_check(const ExperimentConfig& cfg, std::size_t workers) {
    const CompositionSettings& c = cfg.composition;
    std::vector<TrialOutcome> trials(static_cast<std::size_t>(c.n_trials));
    parallel_for(trials.size(), workers,
                           [&](std::size_t i) { trials[i] = composition_trial(cfg, i); });
    std::vector<PairOutcome> pairs(static_cast<std::size_t>(c.n_matrix_pairs));
    parallel_for(pairs.size(), workers,
                           [&](std::size_t i) { pairs[i] = matrix_pair(cfg, i); });

    Table trial_table("composition_trials",
                      {"trial", "kind", "n_steps", "split", "step_size", "weight_decay", "collapse",
                       "relative_error", "state_error", "rank_violations",
                       "noise_independence_error"},
                      "errors are relative (Frobenius for Jacobians, max-norm for states)");
    double max_rel = 0.0;
    double max_state = 0.0;
    double max_noise = 0.0;
    int rank_violations = 0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const TrialOutcome& t = trials[i];
        trial_table.add_row({static_cast<std::int64_t>(i), t.kind, std::int64_t{t.n_steps},
                             std::int64_t{t.split}, t.step_size, t.weight_decay, t.collapse,
                             t.relative_error, t.state_error, std::int64_t{t.rank_violations},
                             t.noise_independence_error});
        max_rel = std::max(max_rel, t.relative_error);
        max_state = std::max(max_state, t.state_error);
        max_noise = std::max(max_noise, t.noise_independence_error);
        rank_violations += t.rank_violations;
    }

    Table pair_table("matrix_pairs",
                     {"pair", "kind", "rows", "inner", "cols", "rank_a", "rank_b", "rank_ab",
                      "rank_violation", "sv_violations", "max_sv_excess"},
                     "ranks are numerical ranks; sv excess is in units of singular values");
    int pair_rank_violations = 0;
    int sv_violations = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const PairOutcome& p = pairs[i];
        pair_table.add_row({static_cast<std::int64_t>(i), p.kind, std::int64_t{p.rows},
                            std::int64_t{p.inner}, std::int64_t{p.cols}, std::int64_t{p.rank_a},
                            std::int64_t{p.rank_b}, std::int64_t{p.rank_ab}, p.rank_violation,
                            std::int64_t{p.sv_violations}, p.max_sv_excess});
        pair_rank_violations += p.rank_violation ? 1 : 0;
        sv_violations += p.sv_violations;
    }

    ScenarioResult out;
    auto& v = out.violations;
    if (max_rel > 1e-10) {
        v.push_back(fmt("composition-check: max composition error %.3g > 1e-10", max_rel));
    }
    if (max_state > 1e-10) {
        v.push_back(fmt("composition-check: split replay moved the endpoint by %.3g", max_state));
    }
    if (max_noise > 1e-12) {
        v.push_back(fmt("composition-check: Jacobian depends on the noise draw (%.3g)", max_noise));
    }
    if (rank_violations > 0) {
        v.push_back("composition-check: " + std::to_string(rank_violations) +
                    " numerical-rank increases along trajectories");
    }
    if (pair_rank_violations > 0) {
        v.push_back("composition-check: " + std::to_string(pair_rank_violations) +
                    " matrix pairs with rank(AB) > min(rank A, rank B)");
    }
    if (sv_violations > 0) {
        v.push_back("composition-check: " + std::to_string(sv_violations) +
                    " singular-value product bound violations");
    }
    out.summary = {
        {"n_trials", c.n_trials},
        {"max_composition_error", max_rel},
        {"max_state_replay_error", max_state},
        {"max_noise_independence_error", max_noise},
        {"rank_monotonicity_violations", rank_violations},
        {"n_matrix_pairs", c.n_matrix_pairs},
        {"pair_rank_violations", pair_rank_violations},
        {"singular_value_violations", sv_violations},
    };
    out.tables.push_back(std::move(trial_table));
    out.tables.push_back(std::move(pair_table));
    return out;
}

// ---------------------------------------------------------------- proxy-probe

ScenarioResult run_proxy_probe(const ExperimentConfig& cfg, std::size_t) {
    const ProxySettings& p = cfg.proxy;
    const tasks::TaskPair pair = tasks::make_task_pair(cfg.pair_spec());
    const tasks::QuadraticTask& task = pair.task_a;
    const SubspaceBasis& q_a = pair.preserving_basis;
    const Eigen::Index d = task.dim();
    const Eigen::Index k = q_a.dim();
    const double tau = cfg.thresholds.tau_sigma;

    Vector profile(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        profile(i) = p.decay_profile.empty() ? static_cast<double>(i + 1) / static_cast<double>(k)
                                             : p.decay_profile[static_cast<std::size_t>(i)];
    }
    StepRule rule = cfg.rule.to_rule();
    rule.decay_shape = q_a.basis() * profile.asDiagonal() * q_a.basis().transpose();
    const int n_samples = p.gradient_samples > 0 ? p.gradient_samples : static_cast<int>(100 * d);
    const Matrix normal = pair.normal_basis.basis();

    struct Checkpoint {
        int step;
        double pr;
        int usable;
        double ra;
        int normal_surviving;
        double grad_norm;
    };
    std::vector<Checkpoint> points;
    std::vector<Vector> samples(static_cast<std::size_t>(n_samples));

    transport::PropagateOptions opts;
    opts.keep_step_jacobians = false;
    opts.observer = [&](int step, const Vector& theta, const Matrix& j) {
        if (step % p.checkpoint_every != 0) {
            return;
        }
        const Vector grad = task.gradient(theta);
        rng::CounterRng gen(cfg.master_seed, 0, static_cast<std::uint64_t>(step), rng::Stream::probe);
        for (Vector& g : samples) {
            g = j.transpose() * (grad + p.gradient_noise * gen.normal_vector(d));
        }
        const Matrix jq = j * q_a.basis();
        const Vector s = spectral::singular_values(jq);
        const Vector sn = spectral::singular_values(j * normal);
        points.push_back({step, capacity::participation_ratio(samples),
                          static_cast<int>((s.array() > tau).count()),
                          std::exp(spectral::log_gram_volume(jq) / static_cast<double>(k)),
                          static_cast<int>((sn.array() > tau).count()), grad.norm()});
    };
    const Vector theta0 = starting_point(task.minimizer(), cfg.initial_std, cfg.master_seed, 0);
    transport::propagate(theta0, task, rule, cfg.n_steps, cfg.master_seed, opts);

    Table table("proxy_probe",
                {"checkpoint", "step", "participation_ratio", "usable_direction_count",
                 "compatible_effective_rank", "normal_surviving_count", "gradient_norm"},
                "participation ratio in directions; counts use singular values above tau_sigma");
    std::vector<double> pr;
    std::vector<double> count;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Checkpoint& c = points[i];
        table.add_row({static_cast<std::int64_t>(i), std::int64_t{c.step}, c.pr,
                       std::int64_t{c.usable}, c.ra, std::int64_t{c.normal_surviving},
                       c.grad_norm});
        pr.push_back(c.pr);
        count.push_back(c.usable);
    }
    const double rho = points.size() >= 2 ? capacity::spearman_correlation(pr, count) : 0.0;

    ScenarioResult out;
    auto& v = out.violations;
    if (rho < 0.8) {
        v.push_back(fmt("proxy-probe: Spearman(PR, usable count) = %.4f < 0.8", rho));
    }
    const double pr0 = points.empty() ? 0.0 : points.front().pr;
    if (std::abs(pr0 - static_cast<double>(d)) > 0.1 * static_cast<double>(d)) {
        v.push_back(fmt("proxy-probe: initial participation ratio %.4f not within 10%% of d = %.0f",
                        pr0, static_cast<double>(d)));
    }
    out.summary = {
        {"checkpoints", points.size()},
        {"gradient_samples", n_samples},
        {"spearman", rho},
        {"initial_participation_ratio", pr0},
        {"final_participation_ratio", points.empty() ? 0.0 : points.back().pr},
        {"final_usable_direction_count", points.empty() ? 0 : points.back().usable},
    };
    out.tables.push_back(std::move(table));
    return out;
}

ScenarioResult run_scenario(const ExperimentConfig& cfg, std::size_t workers) {
    switch (cfg.scenario) {
    case Scenario::esl_gap:
        return run_esl_gap(cfg, workers);
    case Scenario::rank_decay:
        return run_rank_decay(cfg, workers);
    case Scenario::threshold_sweep:
        return run_threshold_sweep(cfg, workers);
    case Scenario::composition_check:
        return run_composition_check(cfg, workers);
    case Scenario::proxy_probe:
        return run_proxy_probe(cfg, workers);
    }
    throw InvalidArgument("run_scenario: unknown scenario");
}

} // namespace transcap::harness
