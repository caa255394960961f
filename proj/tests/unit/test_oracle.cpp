#include "sinkhorn.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace transcap::oracle;

namespace {

PointCloud line(const std::vector<double>& xs) {
    PointCloud p;
    p.n = xs.size();
    p.d = 1;
    p.x = xs;
    return p;
}

} // namespace

TEST(SinkhornOracle, TranslatedCloudCostsShiftSquared) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n01;
    std::vector<double> a(800), b(800);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = n01(gen);
        b[i] = a[i] + 1.5;
    }
    SinkhornOptions opt;
    opt.eps = 0.02;
    EXPECT_NEAR(sinkhorn_divergence(line(a), line(b), opt), 2.25, 0.01);
}

TEST(SinkhornOracle, SelfDivergenceIsZero) {
    const PointCloud a = line({0.0, 0.3, 1.0, 1.7, 2.0});
    EXPECT_NEAR(sinkhorn_divergence(a, a), 0.0, 1e-4);
}

TEST(SinkhornOracle, TwoPointsExact) {
    // Two points each side, far apart relative to eps: the plan is the sorted matching.
    SinkhornOptions opt;
    opt.eps = 1e-3;
    const double ab = entropic_ot(line({0.0, 1.0}), line({0.5, 2.0}), opt).value;
    EXPECT_NEAR(ab, 0.5 * (0.25 + 1.0), 1e-3);
}

TEST(SinkhornOracle, RejectsHighDimension) {
    PointCloud p;
    p.n = 1;
    p.d = 4;
    p.x.assign(4, 0.0);
    EXPECT_THROW(entropic_ot_self(p), std::invalid_argument);
}
