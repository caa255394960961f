#include "transcap/capacity.hpp"

#include "transcap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace transcap::capacity {

RankEstimate summarize_log_volumes(std::vector<double> log_volumes, double dim) {
    if (log_volumes.empty()) {
        throw InvalidArgument("summarize_log_volumes: no realizations");
    }
    RankEstimate out;
    double sum = 0.0;
    bool collapsed = false;
    for (double lv : log_volumes) {
        if (lv == NEGATIVE_INFINITY) {
            collapsed = true;
        } else {
            sum += lv;
        }
    }
    out.per_realization_log_volume = std::move(log_volumes);
    if (collapsed) {
        out.mean_log_volume = NEGATIVE_INFINITY;
        out.value = 0.0;
    } else {
        out.mean_log_volume = sum / static_cast<double>(out.per_realization_log_volume.size());
        out.value = std::exp(out.mean_log_volume / dim);
    }
    return out;
}

namespace {

std::vector<Matrix> cumulative_jacobians(std::span<const Trajectory> trajectories) {
    std::vector<Matrix> out;
    out.reserve(trajectories.size());
    for (const Trajectory& t : trajectories) {
        out.push_back(t.cumulative_jacobian);
    }
    return out;
}

} // namespace

void to_json(nlohmann::json& j, const CapacityReport& r) {
    auto extended = [](double v) -> nlohmann::json {
        if (v == NEGATIVE_INFINITY) {
            return "-inf";
        }
        return v;
    };
    nlohmann::json lv = nlohmann::json::array();
    for (double v : r.per_realization_log_volume) {
        lv.push_back(extended(v));
    }
    j = nlohmann::json{{"effective_rank", r.effective_rank},
                       {"compatible_effective_rank", r.compatible_effective_rank},
                       {"usable_direction_count", r.usable_direction_count},
                       {"singular_profile", r.singular_profile},
                       {"m_b", r.m_b},
                       {"predicted_incompatible", r.predicted_incompatible},
                       {"raw_predicate", r.raw_predicate},
                       {"threshold", r.threshold},
                       {"per_realization_compatible_log_volume", lv}};
}

int round_half_down(double x) { return static_cast<int>(std::ceil(x - 0.5)); }

RankEstimate effective_rank_of(std::span<const Matrix> jacobians) {
    if (jacobians.empty()) {
        throw InvalidArgument("effective_rank: no trajectories");
    }
    const Eigen::Index d = jacobians.front().rows();
    std::vector<double> lv;
    lv.reserve(jacobians.size());
    for (const Matrix& j : jacobians) {
        if (j.rows() != d || j.cols() != d) {
            throw DimensionError("effective_rank: Jacobians must all be " + std::to_string(d) +
                                 "x" + std::to_string(d));
        }
        lv.push_back(spectral::log_gram_volume(j));
    }
    return summarize_log_volumes(std::move(lv), static_cast<double>(d));
}

RankEstimate effective_rank(std::span<const Trajectory> trajectories) {
    const std::vector<Matrix> js = cumulative_jacobians(trajectories);
    return effective_rank_of(js);
}

CompatibleRank compatible_effective_rank_of(std::span<const Matrix> jacobians,
                                            const SubspaceBasis& q_a, double tau) {
    if (jacobians.empty()) {
        throw InvalidArgument("compatible_effective_rank: no trajectories");
    }
    const Eigen::Index k = q_a.dim();
    if (k == 0) {
        throw InvalidArgument("compatible_effective_rank: task-preserving subspace is empty");
    }
    std::vector<double> lv;
    lv.reserve(jacobians.size());
    Vector profile = Vector::Zero(k);
    double usable_sum = 0.0;
    for (const Matrix& j : jacobians) {
        if (j.cols() != q_a.ambient_dim() || j.rows() != j.cols()) {
            throw DimensionError("compatible_effective_rank: Jacobian does not match basis");
        }
        // Singular values of J Q_A are the square roots of the eigenvalues of
        // project_gram(J, Q_A), computed without squaring the condition number.
        const Matrix jq = j * q_a.basis();
        lv.push_back(spectral::log_gram_volume(jq));
        const Vector s = spectral::singular_values(jq);
        profile += s;
        usable_sum += static_cast<double>((s.array() > tau).count());
    }
    const auto n = static_cast<double>(jacobians.size());
    CompatibleRank out;
    out.rank = summarize_log_volumes(std::move(lv), static_cast<double>(k));
    out.usable_direction_count = round_half_down(usable_sum / n);
    profile /= n;
    out.singular_profile.assign(profile.data(), profile.data() + profile.size());
    return out;
}

CompatibleRank compatible_effective_rank(std::span<const Trajectory> trajectories,
                                         const SubspaceBasis& q_a, double tau) {
    const std::vector<Matrix> js = cumulative_jacobians(trajectories);
    return compatible_effective_rank_of(js, q_a, tau);
}

double reconfiguration_dimension(const QuadraticTask& task_b, const SubspaceBasis& q_a) {
    if (q_a.dim() == 0) {
        return 0.0;
    }
    return spectral::stable_rank(tasks::restricted_hessian(task_b, q_a));
}

CapacityReport predict_incompatibility(std::span<const Trajectory> trajectories,
                                       const SubspaceBasis& q_a, const QuadraticTask& task_b,
                                       double tau) {
    const CompatibleRank compat = compatible_effective_rank(trajectories, q_a, tau);
    CapacityReport r;
    r.effective_rank = effective_rank(trajectories).value;
    r.compatible_effective_rank = compat.rank.value;
    r.usable_direction_count = compat.usable_direction_count;
    r.singular_profile = compat.singular_profile;
    r.m_b = reconfiguration_dimension(task_b, q_a);
    r.predicted_incompatible =
        r.m_b > static_cast<double>(r.usable_direction_count) + kPredicateTolerance;
    r.raw_predicate = r.m_b > r.compatible_effective_rank + kPredicateTolerance;
    r.threshold = tau;
    r.per_realization_log_volume = compat.rank.per_realization_log_volume;
    return r;
}

ForgettingMeasurement measure_forgetting(const Vector& theta_initial, const Vector& theta_final,
                                         const QuadraticTask& task_a, double eps_a) {
    if (theta_initial.size() != task_a.dim() || theta_final.size() != task_a.dim()) {
        throw DimensionError("measure_forgetting: state dimension does not match task A");
    }
    ForgettingMeasurement m;
    m.forgetting = task_a.value(theta_final) - task_a.value(theta_initial);
    m.exited_manifold = m.forgetting > eps_a;
    // Distance from theta* + null(H_A): the component on the positive eigenspace.
    const SubspaceBasis normal = task_a.preserving_basis().complement();
    const Vector offset = theta_final - task_a.minimizer();
    m.distance = (normal.basis().transpose() * offset).norm();
    m.mu = task_a.smallest_positive_eigenvalue();
    m.bound_check = m.forgetting - 0.5 * m.mu * m.distance * m.distance;
    return m;
}

ForgettingMeasurement measure_forgetting(const Trajectory& trajectory_on_b,
                                         const QuadraticTask& task_a, double eps_a) {
    return measure_forgetting(trajectory_on_b.initial, trajectory_on_b.final_state(), task_a,
                              eps_a);
}

double participation_ratio(std::span<const Vector> gradient_samples) {
    if (gradient_samples.size() < 2) {
        throw InvalidArgument("participation_ratio: need at least 2 samples");
    }
    const Eigen::Index d = gradient_samples.front().size();
    Vector mean = Vector::Zero(d);
    for (const Vector& g : gradient_samples) {
        if (g.size() != d) {
            throw DimensionError("participation_ratio: samples have different lengths");
        }
        mean += g;
    }
    mean /= static_cast<double>(gradient_samples.size());
    Matrix cov = Matrix::Zero(d, d);
    for (const Vector& g : gradient_samples) {
        const Vector c = g - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(gradient_samples.size() - 1);
    // trace and Frobenius norm give sum(lambda) and sum(lambda^2) for symmetric cov.
    const double tr = cov.trace();
    const double fro2 = cov.squaredNorm();
    if (fro2 == 0.0) {
        return 0.0;
    }
    return tr * tr / fro2;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            ranks[order[t]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw DimensionError("spearman_correlation: series have different lengths");
    }
    if (x.size() < 2) {
        throw InvalidArgument("spearman_correlation: need at least 2 points");
    }
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace transcap::capacity
