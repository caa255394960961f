#pragma once

#include "transcap/rng.hpp"
#include "transcap/spectral.hpp"

namespace transcap::thermo {

/// Eigenvalue floor applied when a degenerate (zero-temperature) covariance is clamped.
inline constexpr double kCovarianceFloor = 1e-12;

/// q = N(mean, covariance) with covariance symmetric positive definite
/// (smallest eigenvalue >= 1e-12 * largest).
class GaussianState {
public:
    GaussianState(Vector mean, Matrix covariance);

    /// Same as the constructor but lifts covariance eigenvalues below
    /// kCovarianceFloor * max(1, lambda_max) instead of rejecting them.
    static GaussianState clamped(Vector mean, Matrix covariance);

    Eigen::Index dim() const noexcept { return mean_.size(); }
    const Vector& mean() const noexcept { return mean_; }
    const Matrix& covariance() const noexcept { return covariance_; }
    bool was_clamped() const noexcept { return clamped_; }

    /// log det of the covariance.
    double log_det_covariance() const;
    Matrix covariance_inverse() const;
    /// Lower Cholesky factor L with L L^T = covariance.
    Matrix cholesky_factor() const;

    Vector sample(rng::CounterRng& gen) const;

private:
    GaussianState(Vector mean, Matrix covariance, bool clamped);

    Vector mean_;
    Matrix covariance_;
    bool clamped_ = false;
};

} // namespace transcap::thermo
