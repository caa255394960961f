#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace transcap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Extended-real sentinel for collapsed log-volumes. Absorbing under addition.
inline constexpr double NEGATIVE_INFINITY = -std::numeric_limits<double>::infinity();

namespace spectral {

/// Relative cutoff below which a singular value counts as zero.
inline constexpr double kRankTolerance = 1e-12;
/// Absolute floor used together with kRankTolerance.
inline constexpr double kAbsoluteFloor = 1e-300;
/// Relative asymmetry accepted before symmetrization.
inline constexpr double kSymmetryTolerance = 1e-8;

struct SpectralDecomposition {
    Vector singular_values; // descending, >= 0
    Matrix left_basis;      // rows x r
    Matrix right_basis;     // cols x r
};

struct SymmetricEigen {
    Vector values;  // descending
    Matrix vectors; // columns match values
};

/// Orthonormal column basis of a k-dimensional subspace of R^d (k may be 0).
class SubspaceBasis {
public:
    SubspaceBasis(Matrix basis, double tolerance = 1e-10);

    static SubspaceBasis identity(Eigen::Index d);
    static SubspaceBasis empty(Eigen::Index d);

    Eigen::Index ambient_dim() const noexcept { return basis_.rows(); }
    Eigen::Index dim() const noexcept { return basis_.cols(); }
    const Matrix& basis() const noexcept { return basis_; }
    Matrix projector() const { return basis_ * basis_.transpose(); }

    /// Basis of the orthogonal complement.
    SubspaceBasis complement() const;
    /// Subspace spanned by the selected columns.
    SubspaceBasis columns(Eigen::Index first, Eigen::Index count) const;

private:
    Matrix basis_;
};

/// Throws InvalidArgument if any entry is NaN or infinite.
void require_finite(const Matrix& a, const char* what);

/// Singular values, descending; length min(rows, cols).
Vector singular_values(const Matrix& a);

SpectralDecomposition svd(const Matrix& a);

/// (H + H^T)/2 after checking ||H - H^T||_F <= kSymmetryTolerance * ||H||_F.
Matrix symmetrize(const Matrix& h);

/// Eigenpairs of a symmetric matrix, descending by value with ties kept in
/// the solver's original index order.
SymmetricEigen symmetric_eigen(const Matrix& h);

/// True when sigma is zero under the rank tolerance relative to sigma_max.
bool is_numerically_zero(double sigma, double sigma_max);

/// Number of singular values above rel_tol * sigma_max (and the absolute floor).
int numerical_rank(const Matrix& a, double rel_tol = kRankTolerance);

/// sum_i log sigma_i^2, or NEGATIVE_INFINITY when any sigma_i is numerically
/// zero. For a square J this is log det(J^T J); for a d x k matrix J Q it is
/// log det(Q^T J^T J Q).
double log_gram_volume(const Matrix& j);

/// ||H||_F^2 / ||H||_2^2 of the symmetrized input; 0 for the zero matrix.
double stable_rank(const Matrix& h);

/// Eigenvectors of symmetric PSD H with eigenvalue <= tol * lambda_max
/// (<= tol when lambda_max <= 0).
SubspaceBasis null_space_basis(const Matrix& h, double tol = 1e-10);

/// Q^T J^T J Q, exactly symmetric.
Matrix project_gram(const Matrix& j, const SubspaceBasis& q);

/// Symmetric square root of an SPD matrix (eigenvalues clamped at 0).
Matrix spd_sqrt(const Matrix& s);

/// Inverse of spd_sqrt.
Matrix spd_inv_sqrt(const Matrix& s);

} // namespace spectral
} // namespace transcap
