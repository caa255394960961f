#pragma once

#include "transcap/gaussian.hpp"
#include "transcap/tasks.hpp"
#include "transcap/transport.hpp"

#include <vector>

namespace transcap::thermo {

using tasks::QuadraticTask;
using transport::StepRule;

/// Default variance given to null directions of H in gibbs_state.
inline constexpr double kNullDirectionVariance = 1e2;

/// Differential entropy (d/2) log(2 pi e) + 1/2 log det Sigma.
double entropy(const GaussianState& g);

/// F[q] = E_q[Phi] - T H(q).
double free_energy(const GaussianState& g, const QuadraticTask& task, double temperature);

/// The quadratic whose gradient is the full drift of `rule` (task plus weight
/// decay), up to an additive constant. Equal to `task` when weight_decay == 0.
QuadraticTask effective_task(const QuadraticTask& task, const StepRule& rule);

/// Gibbs state N(theta*, T H^+) on the positive eigenspace of H, with
/// null_variance on the null directions.
GaussianState gibbs_state(const QuadraticTask& task, double temperature,
                          double null_variance = kNullDirectionVariance);

/// Exact one-step moment recursion of a LANGEVIN or GRADIENT_DESCENT step:
///   mu' = A mu + eta H theta*,  Sigma' = A Sigma A^T + 2 T eta I (Langevin),
/// with A = I - eta (H + wd D). Gradient descent collapses covariance; its
/// result is clamped (see GaussianState::clamped).
GaussianState evolve_gaussian(const GaussianState& g, const QuadraticTask& task,
                              const StepRule& rule);

/// E_q ||v||^2 for the current velocity v = b - T grad log q of the drift b
/// of `rule`.
double mean_squared_current(const GaussianState& g, const QuadraticTask& task,
                            const StepRule& rule);

/// eta * E||v||^2 / T at the pre-step state. Requires a LANGEVIN rule with T > 0.
double entropy_production_step(const GaussianState& g, const QuadraticTask& task,
                               const StepRule& rule);

/// Bures-Wasserstein distance. Exactly symmetric in its arguments.
double w2_gaussian(const GaussianState& g1, const GaussianState& g2);

/// Matrix of the optimal linear map pushing N(0, S0) to N(0, S1).
Matrix optimal_map(const Matrix& s0, const Matrix& s1);

/// n_steps + 1 states of the displacement interpolation from g0 to g1
/// (s = k / n_steps); the endpoints are returned unchanged.
std::vector<GaussianState> ot_geodesic(const GaussianState& g0, const GaussianState& g1,
                                       int n_steps);

struct DissipationLedger {
    std::vector<double> per_step_sigma;
    double total = 0.0;
    std::vector<double> free_energy_series;
    double excess = 0.0;
    double temperature = 1.0;
    /// Physical duration (steps * eta) covered by the ledger.
    double duration = 0.0;

    /// sigma_k - (F_k - F_{k+1}) / T for every step.
    std::vector<double> energy_balance_residuals() const;
    /// Dissipation in units where the speed limit reads D >= W2^2 / 2 over
    /// unit time: duration * T * total / 2.
    double speed_limit_dissipation() const;
};

/// Builds total and excess from per-step entropy production and free energy.
DissipationLedger make_ledger(std::vector<double> per_step_sigma,
                              std::vector<double> free_energy_series, double temperature,
                              double duration);

struct Relaxation {
    std::vector<GaussianState> states; // q_0 ... q_K
    DissipationLedger ledger;
};

/// K closed-form Langevin steps from g0 with the ledger of entropy production
/// and free energy (of the effective task) along the way.
Relaxation relax(const GaussianState& g0, const QuadraticTask& task, const StepRule& rule,
                 int n_steps);

/// Ledger of an externally driven path of states spread evenly over
/// `duration`: each segment moves at constant speed, so
/// sigma_k = W2(q_k, q_{k+1})^2 / (dt T).
DissipationLedger path_ledger(const std::vector<GaussianState>& path, const QuadraticTask& task,
                              double temperature, double duration);

/// Speed-limit slack D - W2(g_start, g_end)^2 / 2; >= 0 when respected.
double esl_slack(const DissipationLedger& ledger, const GaussianState& g_start,
                 const GaussianState& g_end);

} // namespace transcap::thermo
