#pragma once

// Entropic optimal transport between uniform point clouds with squared
// Euclidean cost. Test-only oracle for the Gaussian W2 closed form.
//
// Dense log-domain Sinkhorn. Potentials are solved on nested prefixes of the
// clouds and carried to the next prefix by the soft c-transform; the first
// prefix uses epsilon scaling. The inner sweeps run in single precision with a
// polynomial exp so they vectorize; potentials are kept in double.

#include <cstddef>
#include <vector>

namespace transcap::oracle {

struct PointCloud {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> x; // row-major n x d
};

struct SinkhornOptions {
    double eps = 0.1;
    std::vector<std::size_t> levels{1000, 3000}; // prefixes solved before the full cloud
    double tolerance = 1e-2;                     // L1 marginal error
    double relaxation = 1.5;                     // over-relaxation of the cross updates
    int max_iterations = 2000;                   // per level
};

struct SinkhornResult {
    double value = 0.0; // OT_eps = <f, a> + <g, b>
    double marginal_error = 0.0;
    int iterations = 0; // sweeps at the full size
};

SinkhornResult entropic_ot(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opt = {});

SinkhornResult entropic_ot_self(const PointCloud& a, const SinkhornOptions& opt = {});

// S_eps(a, b) = OT_eps(a, b) - (OT_eps(a, a) + OT_eps(b, b)) / 2.
double sinkhorn_divergence(const PointCloud& a, const PointCloud& b, const SinkhornOptions& opt = {});

} // namespace transcap::oracle
