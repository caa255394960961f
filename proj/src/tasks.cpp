#include "transcap/tasks.hpp"

#include "transcap/errors.hpp"
#include "transcap/rng.hpp"

#include <cmath>
#include <string>

namespace transcap::tasks {

namespace {

void require_dim(const QuadraticTask& task, const Vector& theta, const char* what) {
    if (theta.size() != task.dim()) {
        throw DimensionError(std::string(what) + ": theta has length " +
                             std::to_string(theta.size()) + ", task dimension is " +
                             std::to_string(task.dim()));
    }
}

} // namespace

QuadraticTask::QuadraticTask(Matrix hessian, Vector minimizer, std::string label)
    : hessian_(spectral::symmetrize(hessian)), minimizer_(std::move(minimizer)),
      label_(std::move(label)) {
    if (hessian_.rows() != minimizer_.size()) {
        throw DimensionError("QuadraticTask: Hessian is " + std::to_string(hessian_.rows()) +
                             "x" + std::to_string(hessian_.cols()) + " but minimizer has length " +
                             std::to_string(minimizer_.size()));
    }
    if (minimizer_.size() == 0) {
        throw InvalidArgument("QuadraticTask: dimension must be positive");
    }
    if (!minimizer_.allFinite()) {
        throw InvalidArgument("QuadraticTask: non-finite minimizer");
    }
    const Vector vals =
        Eigen::SelfAdjointEigenSolver<Matrix>(hessian_, Eigen::EigenvaluesOnly).eigenvalues();
    const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
    if (vals.minCoeff() < -1e-10 * scale) {
        throw InvalidArgument("QuadraticTask: Hessian is not positive semidefinite (min eigenvalue " +
                              std::to_string(vals.minCoeff()) + ")");
    }
}

double QuadraticTask::value(const Vector& theta) const {
    require_dim(*this, theta, "value");
    const Vector r = theta - minimizer_;
    return 0.5 * r.dot(hessian_ * r);
}

Vector QuadraticTask::gradient(const Vector& theta) const {
    require_dim(*this, theta, "gradient");
    return hessian_ * (theta - minimizer_);
}

SubspaceBasis QuadraticTask::preserving_basis(double tol) const {
    return spectral::null_space_basis(hessian_, tol);
}

double QuadraticTask::smallest_positive_eigenvalue(double tol) const {
    const spectral::SymmetricEigen eig = spectral::symmetric_eigen(hessian_);
    const double lmax = eig.values(0);
    if (lmax <= 0.0) {
        return 0.0;
    }
    double smallest = lmax;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values(i) > tol * lmax) {
            smallest = std::min(smallest, eig.values(i));
        }
    }
    return smallest;
}

double value(const QuadraticTask& task, const Vector& theta) { return task.value(theta); }

Vector gradient(const QuadraticTask& task, const Vector& theta) { return task.gradient(theta); }

Matrix hessian(const QuadraticTask& task, const Vector& theta) {
    require_dim(task, theta, "hessian");
    return task.hessian();
}

Matrix restricted_hessian(const QuadraticTask& task_b, const SubspaceBasis& q_a) {
    if (q_a.ambient_dim() != task_b.dim()) {
        throw DimensionError("restricted_hessian: basis ambient dimension " +
                             std::to_string(q_a.ambient_dim()) + " != task dimension " +
                             std::to_string(task_b.dim()));
    }
    const Matrix r = q_a.basis().transpose() * task_b.hessian() * q_a.basis();
    return 0.5 * (r + r.transpose());
}

void to_json(nlohmann::json& j, const TaskPairSpec& spec) {
    j = nlohmann::json{{"dim", spec.dim},
                       {"k_a", spec.k_a},
                       {"spectrum_b_on_a", spec.spectrum_b_on_a},
                       {"normal_spectrum_a", spec.normal_spectrum_a},
                       {"rotation_seed", spec.rotation_seed},
                       {"shared_minimizer", spec.shared_minimizer},
                       {"b_offset", spec.b_offset},
                       {"exit_coupling", spec.exit_coupling}};
}

void from_json(const nlohmann::json& j, TaskPairSpec& spec) {
    if (!j.is_object()) {
        throw ConfigError("task_pair", "task pair must be a JSON object");
    }
    TaskPairSpec out;
    for (const auto& [key, val] : j.items()) {
        try {
            if (key == "dim") {
                out.dim = val.get<int>();
            } else if (key == "k_a") {
                out.k_a = val.get<int>();
            } else if (key == "spectrum_b_on_a") {
                out.spectrum_b_on_a = val.get<std::vector<double>>();
            } else if (key == "normal_spectrum_a") {
                out.normal_spectrum_a = val.get<std::vector<double>>();
            } else if (key == "rotation_seed") {
                out.rotation_seed = val.get<std::uint64_t>();
            } else if (key == "shared_minimizer") {
                out.shared_minimizer = val.get<std::vector<double>>();
            } else if (key == "b_offset") {
                out.b_offset = val.get<double>();
            } else if (key == "exit_coupling") {
                out.exit_coupling = val.get<double>();
            } else {
                throw ConfigError("task_pair." + key, "unknown key");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("task_pair." + key, e.what());
        }
    }
    spec = std::move(out);
}

TaskPair make_task_pair(const TaskPairSpec& spec) {
    const int d = spec.dim;
    const int k = spec.k_a;
    if (d <= 0 || k <= 0 || k >= d) {
        throw InvalidArgument("make_task_pair: need 0 < k_a < d (got d=" + std::to_string(d) +
                              ", k_a=" + std::to_string(k) + ")");
    }
    if (static_cast<int>(spec.spectrum_b_on_a.size()) != k) {
        throw InvalidArgument("make_task_pair: spectrum_b_on_a must have k_a entries");
    }
    for (double s : spec.spectrum_b_on_a) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw InvalidArgument("make_task_pair: spectrum entries must be finite and >= 0");
        }
    }
    const int n_normal = d - k;
    std::vector<double> normal = spec.normal_spectrum_a;
    if (normal.empty()) {
        for (int i = 0; i < n_normal; ++i) {
            normal.push_back(n_normal == 1 ? 1.0 : 1.0 + static_cast<double>(i) / (n_normal - 1));
        }
    }
    if (static_cast<int>(normal.size()) != n_normal) {
        throw InvalidArgument("make_task_pair: normal_spectrum_a must have d - k_a entries");
    }
    for (double s : normal) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw InvalidArgument("make_task_pair: normal_spectrum_a entries must be > 0");
        }
    }
    Vector theta_star = Vector::Zero(d);
    if (!spec.shared_minimizer.empty()) {
        if (static_cast<int>(spec.shared_minimizer.size()) != d) {
            throw InvalidArgument("make_task_pair: shared_minimizer must have d entries");
        }
        theta_star = Eigen::Map<const Vector>(spec.shared_minimizer.data(), d);
    }

    const Matrix rot = rng::random_orthogonal(d, spec.rotation_seed);
    const Matrix q_a = rot.leftCols(k);
    const Matrix n_a = rot.rightCols(n_normal);

    const Vector normal_vals = Eigen::Map<const Vector>(normal.data(), n_normal);
    const Matrix h_a = n_a * normal_vals.asDiagonal() * n_a.transpose();

    Matrix h_b = Matrix::Zero(d, d);
    Vector theta_b = theta_star;
    for (int j = 0; j < k; ++j) {
        const double s = spec.spectrum_b_on_a[static_cast<std::size_t>(j)];
        if (s == 0.0) {
            continue;
        }
        const Vector w = q_a.col(j) + spec.exit_coupling * n_a.col(j % n_normal);
        h_b += s * w * w.transpose();
        theta_b += spec.b_offset * q_a.col(j);
    }

    QuadraticTask task_a(h_a, theta_star, "A");
    QuadraticTask task_b(h_b, theta_b, "B");
    SubspaceBasis preserving(q_a);
    SubspaceBasis normal_basis(n_a);
    Matrix restricted = restricted_hessian(task_b, preserving);

    const Vector spec_vals = Eigen::Map<const Vector>(spec.spectrum_b_on_a.data(), k);
    const double target = spectral::stable_rank(Matrix(spec_vals.asDiagonal()));

    return TaskPair{spec,
                    std::move(task_a),
                    std::move(task_b),
                    std::move(preserving),
                    std::move(normal_basis),
                    std::move(restricted),
                    target};
}

TaskPair make_task_pair(int d, int k_a, const std::vector<double>& spectrum_b_on_a,
                        std::uint64_t rotation_seed) {
    TaskPairSpec spec;
    spec.dim = d;
    spec.k_a = k_a;
    spec.spectrum_b_on_a = spectrum_b_on_a;
    spec.rotation_seed = rotation_seed;
    return make_task_pair(spec);
}

} // namespace transcap::tasks
