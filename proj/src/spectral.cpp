#include "transcap/spectral.hpp"

#include "transcap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace transcap::spectral {

namespace {

void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
}

} // namespace

SubspaceBasis::SubspaceBasis(Matrix basis, double tolerance) : basis_(std::move(basis)) {
    require_finite(basis_, "SubspaceBasis");
    if (basis_.rows() == 0) {
        throw InvalidArgument("SubspaceBasis: ambient dimension must be positive");
    }
    if (basis_.cols() > basis_.rows()) {
        throw InvalidArgument("SubspaceBasis: more basis vectors than ambient dimension");
    }
    if (basis_.cols() > 0) {
        const Matrix gram = basis_.transpose() * basis_;
        const double err =
            (gram - Matrix::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
        if (err > tolerance) {
            throw InvalidArgument("SubspaceBasis: columns not orthonormal (max |Q^T Q - I| = " +
                                  std::to_string(err) + ")");
        }
    }
}

SubspaceBasis SubspaceBasis::identity(Eigen::Index d) {
    return SubspaceBasis(Matrix::Identity(d, d));
}

SubspaceBasis SubspaceBasis::empty(Eigen::Index d) {
    return SubspaceBasis(Matrix(d, 0));
}

SubspaceBasis SubspaceBasis::complement() const {
    const Eigen::Index d = ambient_dim();
    const Eigen::Index k = dim();
    if (k == 0) {
        return identity(d);
    }
    if (k == d) {
        return empty(d);
    }
    // Full QR of the basis: trailing columns of Q span the complement.
    Eigen::HouseholderQR<Matrix> qr(basis_);
    const Matrix full = qr.householderQ() * Matrix::Identity(d, d);
    return SubspaceBasis(full.rightCols(d - k));
}

SubspaceBasis SubspaceBasis::columns(Eigen::Index first, Eigen::Index count) const {
    if (first < 0 || count < 0 || first + count > dim()) {
        throw DimensionError("SubspaceBasis::columns: range out of bounds");
    }
    return SubspaceBasis(basis_.middleCols(first, count));
}

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) {
        throw InvalidArgument(std::string(what) + ": non-finite entry");
    }
}

Vector singular_values(const Matrix& a) {
    require_finite(a, "singular_values");
    if (a.size() == 0) {
        return Vector(0);
    }
    Eigen::JacobiSVD<Matrix> solver(a);
    return solver.singularValues();
}

SpectralDecomposition svd(const Matrix& a) {
    require_finite(a, "svd");
    Eigen::JacobiSVD<Matrix> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {solver.singularValues(), solver.matrixU(), solver.matrixV()};
}

Matrix symmetrize(const Matrix& h) {
    require_square(h, "symmetrize");
    require_finite(h, "symmetrize");
    const double norm = h.norm();
    const double asym = (h - h.transpose()).norm();
    if (asym > kSymmetryTolerance * norm) {
        throw InvalidArgument("matrix is not symmetric (relative asymmetry " +
                              std::to_string(norm > 0 ? asym / norm : asym) + ")");
    }
    return 0.5 * (h + h.transpose());
}

SymmetricEigen symmetric_eigen(const Matrix& h) {
    const Matrix sym = symmetrize(h);
    const Eigen::Index n = sym.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("symmetric_eigen: eigensolver failed");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const Vector& vals = solver.eigenvalues();
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return vals(a) > vals(b); });
    SymmetricEigen out{Vector(n), Matrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = vals(order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

bool is_numerically_zero(double sigma, double sigma_max) {
    return sigma <= kRankTolerance * sigma_max || sigma <= kAbsoluteFloor;
}

int numerical_rank(const Matrix& a, double rel_tol) {
    const Vector s = singular_values(a);
    if (s.size() == 0) {
        return 0;
    }
    const double smax = s(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > rel_tol * smax && s(i) > kAbsoluteFloor) {
            ++rank;
        }
    }
    return rank;
}

double log_gram_volume(const Matrix& j) {
    const Vector s = singular_values(j);
    if (s.size() == 0) {
        return 0.0;
    }
    const double smax = s(0);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (is_numerically_zero(s(i), smax)) {
            return NEGATIVE_INFINITY;
        }
        acc += 2.0 * std::log(s(i));
    }
    return acc;
}

double stable_rank(const Matrix& h) {
    const Matrix sym = symmetrize(h);
    if (sym.size() == 0) {
        return 0.0;
    }
    const Vector vals = Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly)
                            .eigenvalues();
    const double spectral = vals.cwiseAbs().maxCoeff();
    if (spectral == 0.0) {
        return 0.0;
    }
    return vals.squaredNorm() / (spectral * spectral);
}

SubspaceBasis null_space_basis(const Matrix& h, double tol) {
    const SymmetricEigen eig = symmetric_eigen(h);
    const Eigen::Index n = eig.values.size();
    const double lmax = n > 0 ? eig.values(0) : 0.0;
    const double cutoff = lmax > 0.0 ? tol * lmax : tol;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (eig.values(i) <= cutoff) {
            keep.push_back(i);
        }
    }
    Matrix q(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        q.col(static_cast<Eigen::Index>(c)) = eig.vectors.col(keep[c]);
    }
    return SubspaceBasis(std::move(q));
}

Matrix project_gram(const Matrix& j, const SubspaceBasis& q) {
    require_square(j, "project_gram");
    if (j.cols() != q.ambient_dim()) {
        throw DimensionError("project_gram: Jacobian is " + std::to_string(j.rows()) + "x" +
                             std::to_string(j.cols()) + " but basis ambient dimension is " +
                             std::to_string(q.ambient_dim()));
    }
    const Matrix jq = j * q.basis();
    const Matrix g = jq.transpose() * jq;
    return 0.5 * (g + g.transpose());
}

Matrix spd_sqrt(const Matrix& s) {
    const SymmetricEigen eig = symmetric_eigen(s);
    const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
    const Matrix r = eig.vectors * root.asDiagonal() * eig.vectors.transpose();
    return 0.5 * (r + r.transpose());
}

Matrix spd_inv_sqrt(const Matrix& s) {
    const SymmetricEigen eig = symmetric_eigen(s);
    if (eig.values.size() > 0 && eig.values.minCoeff() <= 0.0) {
        throw NumericalError("spd_inv_sqrt: matrix is not positive definite");
    }
    const Vector inv_root = eig.values.cwiseSqrt().cwiseInverse();
    const Matrix r = eig.vectors * inv_root.asDiagonal() * eig.vectors.transpose();
    return 0.5 * (r + r.transpose());
}

} // namespace transcap::spectral
