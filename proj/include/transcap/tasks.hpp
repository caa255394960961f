#pragma once

#include "transcap/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace transcap::tasks {

using spectral::SubspaceBasis;

/// Phi(theta) = 1/2 (theta - theta*)^T H (theta - theta*) with symmetric PSD H.
class QuadraticTask {
public:
    QuadraticTask(Matrix hessian, Vector minimizer, std::string label = "task");

    Eigen::Index dim() const noexcept { return minimizer_.size(); }
    const Matrix& hessian() const noexcept { return hessian_; }
    const Vector& minimizer() const noexcept { return minimizer_; }
    const std::string& label() const noexcept { return label_; }

    double value(const Vector& theta) const;
    Vector gradient(const Vector& theta) const;

    /// Basis of the task-preserving directions (null space of H).
    SubspaceBasis preserving_basis(double tol = 1e-10) const;
    /// Smallest eigenvalue above tol * lambda_max; 0 if H == 0.
    double smallest_positive_eigenvalue(double tol = 1e-10) const;

private:
    Matrix hessian_;
    Vector minimizer_;
    std::string label_;
};

double value(const QuadraticTask& task, const Vector& theta);
Vector gradient(const QuadraticTask& task, const Vector& theta);
/// Constant for quadratics; theta is only checked for shape.
Matrix hessian(const QuadraticTask& task, const Vector& theta);

/// H_{B|A} = Q_A^T H_B Q_A.
Matrix restricted_hessian(const QuadraticTask& task_b, const SubspaceBasis& q_a);

/// Everything needed to rebuild a task pair bit-exactly.
struct TaskPairSpec {
    int dim = 4;
    int k_a = 2;
    std::vector<double> spectrum_b_on_a{1.0, 1.0};
    /// Positive eigenvalues of H_A on the normal space; empty means evenly
    /// spaced in [1, 2].
    std::vector<double> normal_spectrum_a{};
    std::uint64_t rotation_seed = 0;
    /// Shared minimizer theta*; empty means the origin.
    std::vector<double> shared_minimizer{};
    /// Displacement of B's minimizer along each curvature direction of B inside Q_A.
    double b_offset = 0.0;
    /// Weight of the normal direction paired with each B curvature direction.
    double exit_coupling = 0.0;

    friend bool operator==(const TaskPairSpec&, const TaskPairSpec&) = default;
};

void to_json(nlohmann::json& j, const TaskPairSpec& spec);
void from_json(const nlohmann::json& j, TaskPairSpec& spec);

struct TaskPair {
    TaskPairSpec spec;
    QuadraticTask task_a;
    QuadraticTask task_b;
    SubspaceBasis preserving_basis; // Q_A, columns ordered as spectrum_b_on_a
    SubspaceBasis normal_basis;     // complement of Q_A
    Matrix restricted_hessian;      // H_{B|A}
    double target_m_b;
};

/// Builds a pair whose H_A has exactly k_a zero eigenvalues on a randomly
/// rotated subspace Q_A and whose restriction Q_A^T H_B Q_A equals
/// diag(spectrum_b_on_a).
TaskPair make_task_pair(const TaskPairSpec& spec);
TaskPair make_task_pair(int d, int k_a, const std::vector<double>& spectrum_b_on_a,
                        std::uint64_t rotation_seed);

} // namespace transcap::tasks
