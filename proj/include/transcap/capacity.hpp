#pragma once

#include "transcap/spectral.hpp"
#include "transcap/tasks.hpp"
#include "transcap/transport.hpp"

#include <span>
#include <vector>

#include <json.hpp>

namespace transcap::capacity {

using spectral::SubspaceBasis;
using tasks::QuadraticTask;
using transport::Trajectory;

/// Default threshold on compatible singular values for counting a direction as usable.
inline constexpr double kDefaultUsableThreshold = 1e-3;
inline constexpr double kDefaultTaskATolerance = 1e-6;
inline constexpr double kDefaultTaskBTolerance = 1e-4;
/// Slack on m_B comparisons so an integer stable rank computed as 3 + 1 ulp
/// does not flip the prediction.
inline constexpr double kPredicateTolerance = 1e-9;

/// Ensemble log-volumes and the resulting rank, shared by R(t) and R_A(t).
struct RankEstimate {
    /// exp(mean log-volume / dim); 0 when any realization collapsed.
    double value = 0.0;
    /// Mean log-volume, NEGATIVE_INFINITY when any realization collapsed.
    double mean_log_volume = 0.0;
    std::vector<double> per_realization_log_volume;
};

struct CompatibleRank {
    RankEstimate rank;
    /// Singular values of J Q_A above tau, averaged and rounded half-down.
    int usable_direction_count = 0;
    /// Mean over realizations of the descending singular values of J Q_A.
    std::vector<double> singular_profile;
};

struct CapacityReport {
    double effective_rank = 0.0;
    double compatible_effective_rank = 0.0;
    int usable_direction_count = 0;
    std::vector<double> singular_profile;
    double m_b = 0.0;
    /// m_B > usable_direction_count.
    bool predicted_incompatible = false;
    /// m_B > R_A(t), the raw volume-based comparison.
    bool raw_predicate = false;
    double threshold = kDefaultUsableThreshold;
    std::vector<double> per_realization_log_volume;
};

void to_json(nlohmann::json& j, const CapacityReport& report);

struct ForgettingMeasurement {
    double forgetting = 0.0;
    bool exited_manifold = false;
    /// forgetting - (mu / 2) delta^2; >= 0 up to roundoff for quadratics.
    double bound_check = 0.0;
    /// Distance from the A-optimal affine subspace.
    double distance = 0.0;
    /// Smallest positive eigenvalue of H_A.
    double mu = 0.0;
};

/// Rounds x to the nearest integer with ties going down.
int round_half_down(double x);

/// Ensemble mean of per-realization log-volumes; any -inf collapses the mean.
RankEstimate summarize_log_volumes(std::vector<double> log_volumes, double dim);

RankEstimate effective_rank(std::span<const Trajectory> trajectories);
RankEstimate effective_rank_of(std::span<const Matrix> jacobians);

CompatibleRank compatible_effective_rank(std::span<const Trajectory> trajectories,
                                         const SubspaceBasis& q_a,
                                         double tau = kDefaultUsableThreshold);
CompatibleRank compatible_effective_rank_of(std::span<const Matrix> jacobians,
                                            const SubspaceBasis& q_a,
                                            double tau = kDefaultUsableThreshold);

/// Stable rank of Q_A^T H_B Q_A.
double reconfiguration_dimension(const QuadraticTask& task_b, const SubspaceBasis& q_a);

CapacityReport predict_incompatibility(std::span<const Trajectory> trajectories,
                                       const SubspaceBasis& q_a, const QuadraticTask& task_b,
                                       double tau = kDefaultUsableThreshold);

/// Forgetting of task A between two parameter vectors, with the
/// strong-convexity bound checked against the distance of `theta_final` from
/// the A-optimal subspace.
ForgettingMeasurement measure_forgetting(const Vector& theta_initial, const Vector& theta_final,
                                         const QuadraticTask& task_a,
                                         double eps_a = kDefaultTaskATolerance);
ForgettingMeasurement measure_forgetting(const Trajectory& trajectory_on_b,
                                         const QuadraticTask& task_a,
                                         double eps_a = kDefaultTaskATolerance);

/// (sum lambda)^2 / sum lambda^2 over the eigenvalues of the sample covariance.
double participation_ratio(std::span<const Vector> gradient_samples);

/// Spearman rank correlation; tied values share their mean rank. Returns 0
/// when either series is constant.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

} // namespace transcap::capacity
