#include "transcap/errors.hpp"
#include "transcap/rng.hpp"
#include "transcap/spectral.hpp"
#include "transcap/tasks.hpp"

#include <gtest/gtest.h>

using namespace transcap;
using namespace transcap::tasks;

namespace {

QuadraticTask random_task(int d, std::uint64_t seed) {
    rng::CounterRng g(seed);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g.normal();
    return QuadraticTask(a * a.transpose(), g.normal_vector(d));
}

} // namespace

TEST(QuadraticTask, ValueExamples) {
    const QuadraticTask t(Matrix::Identity(2, 2), Vector::Zero(2));
    Vector th(2);
    th << 3.0, 4.0;
    EXPECT_DOUBLE_EQ(t.value(th), 12.5);
    EXPECT_DOUBLE_EQ(t.value(Vector::Zero(2)), 0.0);
    EXPECT_EQ(t.gradient(Vector::Zero(2)), Vector::Zero(2));
}

TEST(QuadraticTask, ValueMatchesLineIntegralOfGradient) {
    const QuadraticTask t = random_task(5, 3);
    rng::CounterRng g(4);
    const Vector th = g.normal_vector(5);
    const Vector& star = t.minimizer();
    const int n = 2000;
    double integral = 0.0;
    for (int k = 0; k < n; ++k) {
        const double s = (k + 0.5) / n;
        integral += t.gradient(star + s * (th - star)).dot(th - star) / n;
    }
    EXPECT_NEAR(t.value(th), integral, 1e-9 * std::max(1.0, std::abs(integral)));
}

TEST(QuadraticTask, GradientMatchesFiniteDifferences) {
    const QuadraticTask t = random_task(6, 11);
    rng::CounterRng g(12);
    const Vector th = g.normal_vector(6);
    const double h = 1e-5;
    Vector fd(6);
    for (int i = 0; i < 6; ++i) {
        Vector e = Vector::Zero(6);
        e(i) = h;
        fd(i) = (t.value(th + e) - t.value(th - e)) / (2 * h);
    }
    EXPECT_LE((fd - t.gradient(th)).norm(), 1e-6 * t.gradient(th).norm());
}

TEST(QuadraticTask, HessianMatchesFiniteDifferences) {
    const QuadraticTask t = random_task(4, 13);
    rng::CounterRng g(14);
    const Vector th = g.normal_vector(4);
    const double h = 1e-5;
    Matrix fd(4, 4);
    for (int i = 0; i < 4; ++i) {
        Vector e = Vector::Zero(4);
        e(i) = h;
        fd.col(i) = (t.gradient(th + e) - t.gradient(th - e)) / (2 * h);
    }
    const Matrix hs = hessian(t, th);
    EXPECT_LE((fd - hs).norm(), 1e-6 * hs.norm());
}

TEST(QuadraticTask, RejectsBadInput) {
    EXPECT_THROW(QuadraticTask(-Matrix::Identity(2, 2), Vector::Zero(2)), InvalidArgument);
    EXPECT_THROW(QuadraticTask(Matrix::Identity(2, 2), Vector::Zero(3)), DimensionError);
    const QuadraticTask t(Matrix::Identity(2, 2), Vector::Zero(2));
    EXPECT_THROW(t.value(Vector::Zero(3)), DimensionError);
}

TEST(RestrictedHessian, Examples) {
    const spectral::SubspaceBasis q(Matrix::Identity(4, 4).rightCols(2));
    EXPECT_TRUE(restricted_hessian(QuadraticTask(Matrix::Identity(4, 4), Vector::Zero(4)), q)
                    .isApprox(Matrix::Identity(2, 2)));
    EXPECT_TRUE(restricted_hessian(QuadraticTask(Matrix::Zero(4, 4), Vector::Zero(4)), q).isZero());
    Vector d(4);
    d << 0.0, 0.0, 3.0, 0.5;
    const Matrix r = restricted_hessian(QuadraticTask(d.asDiagonal(), Vector::Zero(4)), q);
    EXPECT_NEAR(r(0, 0), 3.0, 1e-15);
    EXPECT_NEAR(r(1, 1), 0.5, 1e-15);
    EXPECT_NEAR(r(0, 1), 0.0, 1e-15);
}

TEST(MakeTaskPair, ReconfigurationDimensionExamples) {
    EXPECT_NEAR(make_task_pair(4, 2, {1, 1}, 1).target_m_b, 2.0, 1e-12);
    EXPECT_NEAR(make_task_pair(4, 2, {2, 1}, 1).target_m_b, 1.25, 1e-12);
    EXPECT_NEAR(make_task_pair(8, 4, {1, 1, 1, 0}, 1).target_m_b, 3.0, 1e-12);
}

TEST(MakeTaskPair, StructureHolds) {
    const TaskPair p = make_task_pair(8, 3, {2.0, 0.5, 0.0}, 77);
    const Matrix& q = p.preserving_basis.basis();
    EXPECT_EQ(p.preserving_basis.dim(), 3);
    EXPECT_LE((p.task_a.hessian() * q).norm(), 1e-10);
    Vector spectrum(3);
    spectrum << 2.0, 0.5, 0.0;
    EXPECT_LE((p.restricted_hessian - Matrix(spectrum.asDiagonal())).norm(), 1e-10);
    EXPECT_EQ(p.task_a.preserving_basis().dim(), 3);
    EXPECT_LT((q.transpose() * p.normal_basis.basis()).norm(), 1e-12);
}

TEST(MakeTaskPair, DeterministicInSeed) {
    const TaskPair a = make_task_pair(6, 2, {1, 1}, 5);
    const TaskPair b = make_task_pair(6, 2, {1, 1}, 5);
    EXPECT_EQ(a.task_a.hessian(), b.task_a.hessian());
    EXPECT_EQ(a.task_b.hessian(), b.task_b.hessian());
}

TEST(MakeTaskPair, RejectsBadSpec) {
    EXPECT_THROW(make_task_pair(4, 0, {}, 1), InvalidArgument);
    EXPECT_THROW(make_task_pair(4, 4, {1, 1, 1, 1}, 1), InvalidArgument);
    EXPECT_THROW(make_task_pair(4, 2, {1}, 1), InvalidArgument);
    EXPECT_THROW(make_task_pair(4, 2, {1, -1}, 1), InvalidArgument);
}

TEST(TaskPairSpec, JsonRoundTrip) {
    TaskPairSpec s;
    s.dim = 6;
    s.k_a = 3;
    s.spectrum_b_on_a = {1.0, 0.5, 0.25};
    s.rotation_seed = 42;
    s.b_offset = 0.1;
    nlohmann::json j = s;
    EXPECT_EQ(j.get<TaskPairSpec>(), s);
    j["bogus"] = 1;
    EXPECT_THROW(j.get<TaskPairSpec>(), ConfigError);
}
