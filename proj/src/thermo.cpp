#include "transcap/thermo.hpp"

#include "transcap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace transcap::thermo {

namespace {

void require_same_dim(const GaussianState& g, const QuadraticTask& task, const char* what) {
    if (g.dim() != task.dim()) {
        throw DimensionError(std::string(what) + ": state dimension " + std::to_string(g.dim()) +
                             " != task dimension " + std::to_string(task.dim()));
    }
}

void require_no_metric(const StepRule& rule, const char* what) {
    if (rule.metric) {
        throw InvalidArgument(std::string(what) + ": preconditioned rules have no closed-form ensemble");
    }
}

Matrix decay_matrix(const StepRule& rule, Eigen::Index d) {
    if (rule.weight_decay == 0.0) {
        return Matrix::Zero(d, d);
    }
    return rule.weight_decay * (rule.decay_shape ? *rule.decay_shape : Matrix::Identity(d, d));
}

// Lexicographic order on (mean, covariance) used to make w2 exactly symmetric.
bool precedes(const GaussianState& a, const GaussianState& b) {
    for (Eigen::Index i = 0; i < a.mean().size(); ++i) {
        if (a.mean()(i) != b.mean()(i)) {
            return a.mean()(i) < b.mean()(i);
        }
    }
    const Matrix& ca = a.covariance();
    const Matrix& cb = b.covariance();
    for (Eigen::Index i = 0; i < ca.size(); ++i) {
        if (ca.data()[i] != cb.data()[i]) {
            return ca.data()[i] < cb.data()[i];
        }
    }
    return false;
}

} // namespace

double entropy(const GaussianState& g) {
    const double d = static_cast<double>(g.dim());
    return 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e) +
           0.5 * g.log_det_covariance();
}

double free_energy(const GaussianState& g, const QuadraticTask& task, double temperature) {
    require_same_dim(g, task, "free_energy");
    if (!(temperature > 0.0)) {
        throw InvalidArgument("free_energy: temperature must be > 0");
    }
    const Vector r = g.mean() - task.minimizer();
    const double energy =
        0.5 * r.dot(task.hessian() * r) + 0.5 * (task.hessian() * g.covariance()).trace();
    return energy - temperature * entropy(g);
}

QuadraticTask effective_task(const QuadraticTask& task, const StepRule& rule) {
    if (rule.weight_decay == 0.0) {
        return task;
    }
    const Eigen::Index d = task.dim();
    const Matrix h_eff = task.hessian() + decay_matrix(rule, d);
    const Vector pull = task.hessian() * task.minimizer();
    const Vector center = h_eff.completeOrthogonalDecomposition().solve(pull);
    return QuadraticTask(h_eff, center, task.label() + "+decay");
}

GaussianState gibbs_state(const QuadraticTask& task, double temperature, double null_variance) {
    if (!(temperature > 0.0) || !(null_variance > 0.0)) {
        throw InvalidArgument("gibbs_state: temperature and null_variance must be > 0");
    }
    const spectral::SymmetricEigen eig = spectral::symmetric_eigen(task.hessian());
    const double lmax = eig.values(0);
    Vector var(eig.values.size());
    for (Eigen::Index i = 0; i < var.size(); ++i) {
        const double lam = eig.values(i);
        var(i) = (lmax > 0.0 && lam > 1e-10 * lmax) ? temperature / lam : null_variance;
    }
    return GaussianState(task.minimizer(), eig.vectors * var.asDiagonal() * eig.vectors.transpose());
}

GaussianState evolve_gaussian(const GaussianState& g, const QuadraticTask& task,
                              const StepRule& rule) {
    require_same_dim(g, task, "evolve_gaussian");
    require_no_metric(rule, "evolve_gaussian");
    if (rule.kind == transport::StepKind::noisy_gradient) {
        throw InvalidArgument("evolve_gaussian: rule must be LANGEVIN or GRADIENT_DESCENT");
    }
    rule.validate(task.dim());
    const Eigen::Index d = task.dim();
    const Matrix drift = task.hessian() + decay_matrix(rule, d);
    const double lam_max =
        Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (drift + drift.transpose()),
                                              Eigen::EigenvaluesOnly)
            .eigenvalues()
            .maxCoeff();
    if (rule.step_size * lam_max >= 2.0) {
        throw NumericalError("evolve_gaussian: unstable step (eta * lambda_max = " +
                             std::to_string(rule.step_size * lam_max) + " >= 2)");
    }
    const Matrix a = Matrix::Identity(d, d) - rule.step_size * drift;
    Vector mean = a * g.mean() + rule.step_size * (task.hessian() * task.minimizer());
    Matrix cov = a * g.covariance() * a.transpose();
    if (rule.kind == transport::StepKind::langevin) {
        cov += 2.0 * rule.noise_scale * rule.step_size * Matrix::Identity(d, d);
        if (rule.noise_scale > 0.0) {
            return GaussianState(std::move(mean), std::move(cov));
        }
    }
    return GaussianState::clamped(std::move(mean), std::move(cov));
}

double mean_squared_current(const GaussianState& g, const QuadraticTask& task,
                            const StepRule& rule) {
    require_same_dim(g, task, "mean_squared_current");
    require_no_metric(rule, "mean_squared_current");
    const Eigen::Index d = task.dim();
    const Matrix drift = task.hessian() + decay_matrix(rule, d);
    const Vector mean_velocity = -drift * g.mean() + task.hessian() * task.minimizer();
    const Matrix m = -drift + rule.noise_scale * g.covariance_inverse();
    const double spread = (m * g.covariance() * m.transpose()).trace();
    return mean_velocity.squaredNorm() + spread;
}

double entropy_production_step(const GaussianState& g, const QuadraticTask& task,
                               const StepRule& rule) {
    if (rule.kind != transport::StepKind::langevin || !(rule.noise_scale > 0.0)) {
        throw InvalidArgument("entropy_production_step: requires a LANGEVIN rule with T > 0");
    }
    return rule.step_size * mean_squared_current(g, task, rule) / rule.noise_scale;
}

double w2_gaussian(const GaussianState& g1, const GaussianState& g2) {
    if (g1.dim() != g2.dim()) {
        throw DimensionError("w2_gaussian: dimension mismatch");
    }
    const bool swap = precedes(g2, g1);
    if (!swap && !precedes(g1, g2)) {
        return 0.0;
    }
    const GaussianState& a = swap ? g2 : g1;
    const GaussianState& b = swap ? g1 : g2;
    const double mean_part = (a.mean() - b.mean()).squaredNorm();
    const Matrix root_b = spectral::spd_sqrt(b.covariance());
    const Matrix cross = spectral::spd_sqrt(root_b * a.covariance() * root_b);
    const double cov_part =
        a.covariance().trace() + b.covariance().trace() - 2.0 * cross.trace();
    return std::sqrt(std::max(0.0, mean_part + cov_part));
}

Matrix optimal_map(const Matrix& s0, const Matrix& s1) {
    const Matrix root0 = spectral::spd_sqrt(s0);
    const Matrix inv_root0 = spectral::spd_inv_sqrt(s0);
    const Matrix middle = spectral::spd_sqrt(root0 * s1 * root0);
    const Matrix t = inv_root0 * middle * inv_root0;
    return 0.5 * (t + t.transpose());
}

std::vector<GaussianState> ot_geodesic(const GaussianState& g0, const GaussianState& g1,
                                       int n_steps) {
    if (g0.dim() != g1.dim()) {
        throw DimensionError("ot_geodesic: dimension mismatch");
    }
    if (n_steps < 1) {
        throw InvalidArgument("ot_geodesic: n_steps must be >= 1");
    }
    const Eigen::Index d = g0.dim();
    const Matrix t = optimal_map(g0.covariance(), g1.covariance());
    const Matrix eye = Matrix::Identity(d, d);
    std::vector<GaussianState> path;
    path.reserve(static_cast<std::size_t>(n_steps) + 1);
    path.push_back(g0);
    for (int k = 1; k < n_steps; ++k) {
        const double s = static_cast<double>(k) / n_steps;
        const Matrix m = (1.0 - s) * eye + s * t;
        path.emplace_back((1.0 - s) * g0.mean() + s * g1.mean(),
                          m * g0.covariance() * m.transpose());
    }
    path.push_back(g1);
    return path;
}

std::vector<double> DissipationLedger::energy_balance_residuals() const {
    std::vector<double> out(per_step_sigma.size());
    for (std::size_t k = 0; k < per_step_sigma.size(); ++k) {
        out[k] = per_step_sigma[k] -
                 (free_energy_series[k] - free_energy_series[k + 1]) / temperature;
    }
    return out;
}

double DissipationLedger::speed_limit_dissipation() const {
    return 0.5 * duration * temperature * total;
}

DissipationLedger make_ledger(std::vector<double> per_step_sigma,
                              std::vector<double> free_energy_series, double temperature,
                              double duration) {
    if (free_energy_series.size() != per_step_sigma.size() + 1) {
        throw InvalidArgument("make_ledger: need one more free-energy value than steps");
    }
    DissipationLedger ledger;
    ledger.temperature = temperature;
    ledger.duration = duration;
    ledger.total = 0.0;
    for (double s : per_step_sigma) {
        ledger.total += s;
    }
    ledger.per_step_sigma = std::move(per_step_sigma);
    ledger.free_energy_series = std::move(free_energy_series);
    ledger.excess = ledger.total -
                    (ledger.free_energy_series.front() - ledger.free_energy_series.back()) /
                        temperature;
    return ledger;
}

Relaxation relax(const GaussianState& g0, const QuadraticTask& task, const StepRule& rule,
                 int n_steps) {
    if (rule.kind != transport::StepKind::langevin || !(rule.noise_scale > 0.0)) {
        throw InvalidArgument("relax: requires a LANGEVIN rule with T > 0");
    }
    if (n_steps < 0) {
        throw InvalidArgument("relax: n_steps must be >= 0");
    }
    const double temp = rule.noise_scale;
    const QuadraticTask eff = effective_task(task, rule);
    Relaxation out;
    out.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.states.push_back(g0);
    std::vector<double> sigma;
    std::vector<double> free;
    sigma.reserve(static_cast<std::size_t>(n_steps));
    free.reserve(static_cast<std::size_t>(n_steps) + 1);
    free.push_back(free_energy(g0, eff, temp));
    for (int k = 0; k < n_steps; ++k) {
        const GaussianState& cur = out.states.back();
        sigma.push_back(entropy_production_step(cur, task, rule));
        GaussianState next = evolve_gaussian(cur, task, rule);
        free.push_back(free_energy(next, eff, temp));
        out.states.push_back(std::move(next));
    }
    out.ledger = make_ledger(std::move(sigma), std::move(free), temp, n_steps * rule.step_size);
    return out;
}

DissipationLedger path_ledger(const std::vector<GaussianState>& path, const QuadraticTask& task,
                              double temperature, double duration) {
    if (path.empty()) {
        throw InvalidArgument("path_ledger: empty path");
    }
    if (!(temperature > 0.0) || !(duration >= 0.0)) {
        throw InvalidArgument("path_ledger: temperature must be > 0 and duration >= 0");
    }
    const std::size_t n = path.size() - 1;
    std::vector<double> sigma;
    std::vector<double> free;
    sigma.reserve(n);
    free.reserve(n + 1);
    free.push_back(free_energy(path.front(), task, temperature));
    const double dt = n > 0 ? duration / static_cast<double>(n) : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = w2_gaussian(path[k], path[k + 1]);
        sigma.push_back(dt > 0.0 ? w * w / (dt * temperature) : 0.0);
        free.push_back(free_energy(path[k + 1], task, temperature));
    }
    return make_ledger(std::move(sigma), std::move(free), temperature, duration);
}

double esl_slack(const DissipationLedger& ledger, const GaussianState& g_start,
                 const GaussianState& g_end) {
    const double w = w2_gaussian(g_start, g_end);
    return ledger.speed_limit_dissipation() - 0.5 * w * w;
}

} // namespace transcap::thermo
