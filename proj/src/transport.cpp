#include "transcap/transport.hpp"

#include "transcap/errors.hpp"
#include "transcap/parallel.hpp"
#include "transcap/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace transcap::transport {

namespace {

void check_operator(const std::optional<Matrix>& op, Eigen::Index d, const char* name) {
    if (!op) {
        return;
    }
    if (op->rows() != d || op->cols() != d) {
        throw DimensionError(std::string("StepRule: ") + name + " must be " + std::to_string(d) +
                             "x" + std::to_string(d));
    }
    spectral::symmetrize(*op);
}

} // namespace

std::string_view to_string(StepKind kind) {
    switch (kind) {
    case StepKind::gradient_descent:
        return "GRADIENT_DESCENT";
    case StepKind::noisy_gradient:
        return "NOISY_GRADIENT";
    case StepKind::langevin:
        return "LANGEVIN";
    }
    return "UNKNOWN";
}

StepKind step_kind_from_string(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "GRADIENT_DESCENT" || upper == "GD") {
        return StepKind::gradient_descent;
    }
    if (upper == "NOISY_GRADIENT") {
        return StepKind::noisy_gradient;
    }
    if (upper == "LANGEVIN") {
        return StepKind::langevin;
    }
    throw InvalidArgument("unknown step kind '" + std::string(name) + "'");
}

void StepRule::validate(Eigen::Index d) const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
        throw InvalidArgument("StepRule: step_size must be > 0");
    }
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
        throw InvalidArgument("StepRule: noise_scale must be >= 0");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw InvalidArgument("StepRule: weight_decay must be >= 0");
    }
    check_operator(decay_shape, d, "decay_shape");
    check_operator(metric, d, "metric");
}

Matrix StepRule::drift_operator(const QuadraticTask& task) const {
    const Eigen::Index d = task.dim();
    Matrix op = metric ? Matrix(*metric * task.hessian()) : task.hessian();
    if (weight_decay != 0.0) {
        if (decay_shape) {
            op += weight_decay * *decay_shape;
        } else {
            op += weight_decay * Matrix::Identity(d, d);
        }
    }
    return op;
}

Matrix StepRule::step_jacobian(const QuadraticTask& task) const {
    const Eigen::Index d = task.dim();
    return Matrix::Identity(d, d) - step_size * drift_operator(task);
}

double StepRule::noise_amplitude() const {
    switch (kind) {
    case StepKind::gradient_descent:
        return 0.0;
    case StepKind::noisy_gradient:
        return step_size * noise_scale;
    case StepKind::langevin:
        return std::sqrt(2.0 * noise_scale * step_size);
    }
    return 0.0;
}

StepResult step(const Vector& theta, const QuadraticTask& task, const StepRule& rule,
                const Vector& noise_draw) {
    const Eigen::Index d = task.dim();
    if (theta.size() != d) {
        throw DimensionError("step: theta has length " + std::to_string(theta.size()) +
                             ", task dimension is " + std::to_string(d));
    }
    const double amp = rule.noise_amplitude();
    if (amp > 0.0 && noise_draw.size() != d) {
        throw DimensionError("step: noise draw has length " + std::to_string(noise_draw.size()) +
                             ", expected " + std::to_string(d));
    }
    Vector grad = task.gradient(theta);
    if (rule.metric) {
        grad = *rule.metric * grad;
    }
    Vector drift = grad;
    if (rule.weight_decay != 0.0) {
        drift += rule.weight_decay * (rule.decay_shape ? Vector(*rule.decay_shape * theta) : theta);
    }
    Vector next = theta - rule.step_size * drift;
    if (amp > 0.0) {
        next += amp * noise_draw;
    }
    if (!next.allFinite()) {
        throw NumericalError("step: non-finite update");
    }
    return {std::move(next), rule.step_jacobian(task)};
}

double Trajectory::composition_error() const {
    const Eigen::Index d = cumulative_jacobian.rows();
    Matrix product = Matrix::Identity(d, d);
    for (const Matrix& j : step_jacobians) {
        product = j * product;
    }
    const double scale = std::max(product.norm(), 1e-300);
    return (product - cumulative_jacobian).norm() / scale;
}

Trajectory propagate(const Vector& theta0, const QuadraticTask& task, const StepRule& rule,
                     int n_steps, std::uint64_t omega_seed, const PropagateOptions& options) {
    const Eigen::Index d = task.dim();
    if (n_steps < 0) {
        throw InvalidArgument("propagate: n_steps must be >= 0");
    }
    if (theta0.size() != d) {
        throw DimensionError("propagate: theta0 has length " + std::to_string(theta0.size()) +
                             ", task dimension is " + std::to_string(d));
    }
    rule.validate(d);

    Trajectory traj;
    traj.initial = theta0;
    traj.omega_seed = omega_seed;
    traj.realization = options.realization;
    traj.start_step = options.start_step;
    traj.rule = rule;
    traj.task_label = task.label();
    traj.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    traj.states.push_back(theta0);
    traj.cumulative_jacobian = Matrix::Identity(d, d);
    if (options.keep_step_jacobians) {
        traj.step_jacobians.reserve(static_cast<std::size_t>(n_steps));
    }
    if (options.observer) {
        options.observer(0, theta0, traj.cumulative_jacobian);
    }

    // Quadratic tasks have state-independent step Jacobians.
    const Matrix jac = rule.step_jacobian(task);
    const bool stochastic = rule.is_stochastic();
    const Vector no_noise;
    Vector theta = theta0;
    for (int k = 0; k < n_steps; ++k) {
        const auto global = static_cast<std::uint64_t>(options.start_step + k);
        StepResult r;
        if (stochastic) {
            rng::CounterRng gen(omega_seed, options.realization, global, rng::Stream::noise);
            r = step(theta, task, rule, gen.normal_vector(d));
        } else {
            r = step(theta, task, rule, no_noise);
        }
        theta = std::move(r.next);
        if (theta.norm() > kDivergenceThreshold) {
            throw NumericalError("propagate: divergence at step " + std::to_string(global + 1) +
                                 " (||theta|| > 1e8; step size beyond stability?)");
        }
        traj.cumulative_jacobian = jac * traj.cumulative_jacobian;
        if (options.keep_step_jacobians) {
            traj.step_jacobians.push_back(jac);
        }
        traj.states.push_back(theta);
        if (options.observer) {
            options.observer(k + 1, theta, traj.cumulative_jacobian);
        }
        if (options.stop_when && options.stop_when(k + 1, theta)) {
            break;
        }
    }
    return traj;
}

Trajectory compose(const Trajectory& first, const Trajectory& second) {
    const Vector& end = first.final_state();
    if (second.initial.size() != end.size()) {
        throw DimensionError("compose: trajectories have different dimensions");
    }
    if ((second.initial - end).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, end.cwiseAbs().maxCoeff())) {
        throw InvalidArgument("compose: second trajectory does not start where the first ends");
    }
    Trajectory out = first;
    out.states.insert(out.states.end(), second.states.begin() + 1, second.states.end());
    if (first.step_jacobians.size() == static_cast<std::size_t>(first.n_steps()) &&
        second.step_jacobians.size() == static_cast<std::size_t>(second.n_steps())) {
        out.step_jacobians.insert(out.step_jacobians.end(), second.step_jacobians.begin(),
                                  second.step_jacobians.end());
    } else {
        out.step_jacobians.clear();
    }
    out.cumulative_jacobian = second.cumulative_jacobian * first.cumulative_jacobian;
    if (second.task_label != first.task_label && second.n_steps() > 0) {
        out.task_label = first.n_steps() > 0 ? first.task_label + "+" + second.task_label
                                             : second.task_label;
    }
    return out;
}

Vector ensemble_initial_state(const thermo::GaussianState& q0, std::uint64_t master_seed,
                              std::uint64_t realization) {
    rng::CounterRng gen(master_seed, realization, 0, rng::Stream::initial);
    return q0.sample(gen);
}

std::vector<Trajectory> ensemble_propagate(const thermo::GaussianState& q0,
                                           const QuadraticTask& task, const StepRule& rule,
                                           int n_steps, int n_realizations,
                                           std::uint64_t master_seed, std::size_t workers,
                                           bool keep_step_jacobians) {
    if (n_realizations < 1) {
        throw InvalidArgument("ensemble_propagate: n_realizations must be >= 1");
    }
    if (q0.dim() != task.dim()) {
        throw DimensionError("ensemble_propagate: initial distribution dimension mismatch");
    }
    std::vector<Trajectory> out(static_cast<std::size_t>(n_realizations));
    parallel_for(out.size(), workers, [&](std::size_t r) {
        PropagateOptions opts;
        opts.realization = r;
        opts.keep_step_jacobians = keep_step_jacobians;
        out[r] = propagate(ensemble_initial_state(q0, master_seed, r), task, rule, n_steps,
                           master_seed, opts);
    });
    return out;
}

} // namespace transcap::transport
