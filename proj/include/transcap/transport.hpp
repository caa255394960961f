#pragma once

#include "transcap/gaussian.hpp"
#include "transcap/spectral.hpp"
#include "transcap/tasks.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace transcap::transport {

using tasks::QuadraticTask;

/// States with ||theta|| above this abort propagation.
inline constexpr double kDivergenceThreshold = 1e8;

enum class StepKind { gradient_descent, noisy_gradient, langevin };

std::string_view to_string(StepKind kind);
/// Accepts "GRADIENT_DESCENT", "NOISY_GRADIENT", "LANGEVIN" (case-insensitive).
StepKind step_kind_from_string(std::string_view name);

/// One step of the learning dynamics:
///   theta' = theta - eta * (G grad Phi(theta) + wd * D theta) + noise
/// with G = metric (identity unless set) and D = decay_shape (identity unless
/// set). The noise term is eta * noise_scale * xi for NOISY_GRADIENT,
/// sqrt(2 T eta) * xi for LANGEVIN (T = noise_scale), and absent for
/// GRADIENT_DESCENT.
struct StepRule {
    StepKind kind = StepKind::gradient_descent;
    double step_size = 0.1;
    double noise_scale = 0.0;
    double weight_decay = 0.0;
    /// Symmetric PSD shape of the weight decay; lets decay act on a subspace
    /// or with per-direction rates.
    std::optional<Matrix> decay_shape;
    /// Symmetric PSD preconditioner applied to the task gradient. Gradient
    /// descent through an earlier transport map with Jacobian J uses J J^T.
    std::optional<Matrix> metric;

    /// Throws InvalidArgument on eta <= 0, negative noise or decay, or
    /// operator shapes that do not match d.
    void validate(Eigen::Index d) const;

    /// G H + wd D: the linear part of the drift.
    Matrix drift_operator(const QuadraticTask& task) const;
    /// I - eta (G H + wd D).
    Matrix step_jacobian(const QuadraticTask& task) const;
    /// Coefficient multiplying the standard normal draw.
    double noise_amplitude() const;
    bool is_stochastic() const noexcept { return noise_amplitude() > 0.0; }
};

struct StepResult {
    Vector next;
    Matrix jacobian;
};

StepResult step(const Vector& theta, const QuadraticTask& task, const StepRule& rule,
                const Vector& noise_draw);

/// A realized transport map theta_K = Psi_K(theta_0; omega) with its
/// differential.
struct Trajectory {
    Vector initial;
    std::vector<Vector> states; // theta_0 ... theta_K
    /// Empty when propagation ran with keep_step_jacobians = false.
    std::vector<Matrix> step_jacobians;
    Matrix cumulative_jacobian;
    std::uint64_t omega_seed = 0;
    std::uint64_t realization = 0;
    /// Global index of the first step; noise for step k is keyed by start_step + k.
    int start_step = 0;
    StepRule rule;
    std::string task_label;

    int n_steps() const noexcept { return static_cast<int>(states.size()) - 1; }
    const Vector& final_state() const { return states.back(); }
    /// Relative Frobenius error between cumulative_jacobian and the ordered
    /// product of step_jacobians.
    double composition_error() const;
};

/// Called after every step k (1-based) and once for k = 0 with the state and
/// the cumulative Jacobian so far.
using StepObserver = std::function<void(int step, const Vector& theta, const Matrix& cumulative)>;

struct PropagateOptions {
    std::uint64_t realization = 0;
    int start_step = 0;
    bool keep_step_jacobians = true;
    StepObserver observer;
    /// Checked after each step; returning true ends propagation early.
    std::function<bool(int step, const Vector& theta)> stop_when;
};

/// Runs n_steps of `rule` from theta0. Noise for global step s is drawn from
/// the counter stream (omega_seed, realization, s), so a run split at any
/// point and resumed with start_step replays identically.
Trajectory propagate(const Vector& theta0, const QuadraticTask& task, const StepRule& rule,
                     int n_steps, std::uint64_t omega_seed, const PropagateOptions& options = {});

/// Concatenation; requires second.initial == first.final_state() within 1e-12.
Trajectory compose(const Trajectory& first, const Trajectory& second);

/// n_realizations independent trajectories with theta_0 ~ q0 drawn from
/// (master_seed, r, Stream::initial) and noise from (master_seed, r, step).
std::vector<Trajectory> ensemble_propagate(const thermo::GaussianState& q0,
                                           const QuadraticTask& task, const StepRule& rule,
                                           int n_steps, int n_realizations,
                                           std::uint64_t master_seed, std::size_t workers = 0,
                                           bool keep_step_jacobians = true);

/// The initial state used by ensemble_propagate for realization r.
Vector ensemble_initial_state(const thermo::GaussianState& q0, std::uint64_t master_seed,
                              std::uint64_t realization);

} // namespace transcap::transport
