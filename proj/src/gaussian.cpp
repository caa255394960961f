#include "transcap/gaussian.hpp"

#include "transcap/errors.hpp"

#include <cmath>
#include <string>

namespace transcap::thermo {

GaussianState::GaussianState(Vector mean, Matrix covariance)
    : GaussianState(std::move(mean), std::move(covariance), false) {}

GaussianState::GaussianState(Vector mean, Matrix covariance, bool clamped)
    : mean_(std::move(mean)), clamped_(clamped) {
    if (covariance.rows() != mean_.size() || covariance.cols() != mean_.size()) {
        throw DimensionError("GaussianState: covariance shape does not match mean length " +
                             std::to_string(mean_.size()));
    }
    if (!mean_.allFinite()) {
        throw InvalidArgument("GaussianState: non-finite mean");
    }
    covariance_ = spectral::symmetrize(covariance);
    const Vector vals =
        Eigen::SelfAdjointEigenSolver<Matrix>(covariance_, Eigen::EigenvaluesOnly).eigenvalues();
    const double lmax = vals.maxCoeff();
    if (!(lmax > 0.0) || vals.minCoeff() < 1e-12 * lmax) {
        throw NumericalError("GaussianState: covariance is not positive definite (eigenvalues in [" +
                             std::to_string(vals.minCoeff()) + ", " + std::to_string(lmax) + "])");
    }
}

GaussianState GaussianState::clamped(Vector mean, Matrix covariance) {
    const spectral::SymmetricEigen eig = spectral::symmetric_eigen(covariance);
    const double floor = kCovarianceFloor * std::max(1.0, eig.values(0));
    if (eig.values.minCoeff() >= floor) {
        return GaussianState(std::move(mean), std::move(covariance), false);
    }
    const Vector lifted = eig.values.cwiseMax(floor);
    Matrix fixed = eig.vectors * lifted.asDiagonal() * eig.vectors.transpose();
    return GaussianState(std::move(mean), 0.5 * (fixed + fixed.transpose()), true);
}

double GaussianState::log_det_covariance() const {
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("GaussianState: Cholesky factorization failed");
    }
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Matrix GaussianState::covariance_inverse() const {
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("GaussianState: Cholesky factorization failed");
    }
    Matrix inv = llt.solve(Matrix::Identity(dim(), dim()));
    return 0.5 * (inv + inv.transpose());
}

Matrix GaussianState::cholesky_factor() const {
    Eigen::LLT<Matrix> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("GaussianState: Cholesky factorization failed");
    }
    return llt.matrixL();
}

Vector GaussianState::sample(rng::CounterRng& gen) const {
    return mean_ + cholesky_factor() * gen.normal_vector(dim());
}

} // namespace transcap::thermo
