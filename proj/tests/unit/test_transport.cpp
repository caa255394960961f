#include "transcap/errors.hpp"
#include "transcap/thermo.hpp"
#include "transcap/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace transcap;
using namespace transcap::transport;
using tasks::QuadraticTask;

namespace {

Matrix matrix_power(const Matrix& m, int k) {
    Matrix out = Matrix::Identity(m.rows(), m.cols());
    for (int i = 0; i < k; ++i) out = m * out;
    return out;
}

QuadraticTask random_task(int d, std::uint64_t seed, double scale = 1.0) {
    rng::CounterRng g(seed);
    Matrix a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = g.normal();
    Matrix h = a * a.transpose();
    h *= scale / h.norm();
    return QuadraticTask(h, g.normal_vector(d));
}

StepRule rule_of(StepKind kind, double eta, double noise = 0.0, double wd = 0.0) {
    StepRule r;
    r.kind = kind;
    r.step_size = eta;
    r.noise_scale = noise;
    r.weight_decay = wd;
    return r;
}

} // namespace

TEST(StepKind, Names) {
    EXPECT_EQ(step_kind_from_string("langevin"), StepKind::langevin);
    EXPECT_EQ(step_kind_from_string("NOISY_GRADIENT"), StepKind::noisy_gradient);
    EXPECT_EQ(to_string(StepKind::gradient_descent), "GRADIENT_DESCENT");
    EXPECT_THROW(step_kind_from_string("adam"), InvalidArgument);
}

TEST(Step, FixedPoint) {
    const QuadraticTask t = random_task(3, 1);
    const StepRule r = rule_of(StepKind::gradient_descent, 0.3);
    const StepResult s = step(t.minimizer(), t, r, Vector());
    EXPECT_LT((s.next - t.minimizer()).norm(), 1e-14);
    EXPECT_TRUE(s.jacobian.isApprox(Matrix::Identity(3, 3) - 0.3 * t.hessian()));
}

TEST(Step, NullDirectionUntouched) {
    Vector d(2);
    d << 1.0, 0.0;
    const QuadraticTask t(d.asDiagonal(), Vector::Zero(2));
    const StepResult s = step(Vector::Ones(2), t, rule_of(StepKind::gradient_descent, 0.5), Vector());
    EXPECT_DOUBLE_EQ(s.jacobian(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(s.jacobian(1, 1), 1.0);
    EXPECT_DOUBLE_EQ(s.jacobian(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.next(1), 1.0);
}

TEST(Step, NoisyJacobianEqualsGradientDescent) {
    const QuadraticTask t = random_task(4, 2);
    const StepRule gd = rule_of(StepKind::gradient_descent, 0.2);
    const StepRule noisy = rule_of(StepKind::noisy_gradient, 0.2, 3.0);
    rng::CounterRng g(5);
    for (int i = 0; i < 10; ++i) {
        const Vector th = g.normal_vector(4);
        EXPECT_EQ(step(th, t, noisy, g.normal_vector(4)).jacobian, step(th, t, gd, Vector()).jacobian);
    }
}

TEST(StepRule, Validation) {
    EXPECT_THROW(rule_of(StepKind::gradient_descent, 0.0).validate(2), InvalidArgument);
    EXPECT_THROW(rule_of(StepKind::langevin, 0.1, -1.0).validate(2), InvalidArgument);
    EXPECT_THROW(rule_of(StepKind::gradient_descent, 0.1, 0.0, -1.0).validate(2), InvalidArgument);
    StepRule r = rule_of(StepKind::gradient_descent, 0.1);
    r.metric = Matrix::Identity(3, 3);
    EXPECT_THROW(r.validate(2), DimensionError);
    EXPECT_DOUBLE_EQ(rule_of(StepKind::langevin, 0.02, 2.0).noise_amplitude(), std::sqrt(0.08));
    EXPECT_DOUBLE_EQ(rule_of(StepKind::noisy_gradient, 0.02, 2.0).noise_amplitude(), 0.04);
}

TEST(Propagate, ZeroStepsIsIdentity) {
    const QuadraticTask t = random_task(3, 3);
    const Trajectory tr = propagate(Vector::Ones(3), t, rule_of(StepKind::langevin, 0.1, 1.0), 0, 1);
    EXPECT_EQ(tr.cumulative_jacobian, Matrix::Identity(3, 3));
    EXPECT_EQ(tr.n_steps(), 0);
}

TEST(Propagate, MatrixPowerOracle) {
    const QuadraticTask t = random_task(5, 4);
    const double eta = 0.4;
    const int k = 37;
    const Trajectory tr = propagate(Vector::Ones(5), t, rule_of(StepKind::gradient_descent, eta), k, 0);
    const Matrix oracle = matrix_power(Matrix::Identity(5, 5) - eta * t.hessian(), k);
    EXPECT_LE((tr.cumulative_jacobian - oracle).norm(), 1e-12 * std::max(1.0, oracle.norm()));
    EXPECT_LE(tr.composition_error(), 1e-14);
}

TEST(Propagate, SplitReplayMatches) {
    const QuadraticTask t = random_task(4, 6);
    const StepRule r = rule_of(StepKind::langevin, 0.05, 0.7, 0.1);
    const Trajectory full = propagate(Vector::Ones(4), t, r, 30, 99);
    const Trajectory first = propagate(Vector::Ones(4), t, r, 12, 99);
    PropagateOptions opts;
    opts.start_step = 12;
    const Trajectory second = propagate(first.final_state(), t, r, 18, 99, opts);
    EXPECT_EQ(second.final_state(), full.final_state());
    const Matrix product = second.cumulative_jacobian * first.cumulative_jacobian;
    EXPECT_LE((product - full.cumulative_jacobian).norm(), 1e-13 * full.cumulative_jacobian.norm());
}

TEST(Propagate, StopWhenEndsEarly) {
    const QuadraticTask t(Matrix::Identity(2, 2), Vector::Zero(2));
    PropagateOptions opts;
    opts.stop_when = [](int, const Vector& th) { return th.norm() < 0.5; };
    const Trajectory tr = propagate(Vector::Ones(2), t, rule_of(StepKind::gradient_descent, 0.1), 1000, 0, opts);
    EXPECT_LT(tr.n_steps(), 1000);
    EXPECT_LT(tr.final_state().norm(), 0.5);
}

TEST(Propagate, DivergenceRaises) {
    const QuadraticTask t(Matrix::Identity(2, 2), Vector::Zero(2));
    EXPECT_THROW(propagate(Vector::Ones(2), t, rule_of(StepKind::gradient_descent, 3.0), 200, 0),
                 NumericalError);
}

TEST(Compose, EmptyIsIdentity) {
    const QuadraticTask t = random_task(3, 7);
    const Trajectory a = propagate(Vector::Ones(3), t, rule_of(StepKind::gradient_descent, 0.3), 5, 0);
    const Trajectory empty = propagate(a.final_state(), t, rule_of(StepKind::gradient_descent, 0.3), 0, 0);
    const Trajectory c = compose(a, empty);
    EXPECT_EQ(c.cumulative_jacobian, a.cumulative_jacobian);
    EXPECT_EQ(c.n_steps(), 5);
}

TEST(Compose, TwoTasksProductOracle) {
    const QuadraticTask ta = random_task(4, 8);
    const QuadraticTask tb = random_task(4, 9);
    const StepRule r = rule_of(StepKind::gradient_descent, 0.25);
    const Trajectory a = propagate(Vector::Ones(4), ta, r, 7, 0);
    const Trajectory b = propagate(a.final_state(), tb, r, 11, 0);
    const Trajectory c = compose(a, b);
    const Matrix id = Matrix::Identity(4, 4);
    const Matrix oracle = matrix_power(id - 0.25 * tb.hessian(), 11) * matrix_power(id - 0.25 * ta.hessian(), 7);
    EXPECT_LE((c.cumulative_jacobian - oracle).norm(), 1e-13 * oracle.norm());
    EXPECT_EQ(c.n_steps(), 18);
    const Trajectory same = compose(a, propagate(a.final_state(), ta, r, 5, 0));
    EXPECT_LE((same.cumulative_jacobian - matrix_power(id - 0.25 * ta.hessian(), 12)).norm(), 1e-13);
}

TEST(Compose, RejectsGap) {
    const QuadraticTask t = random_task(3, 10);
    const StepRule r = rule_of(StepKind::gradient_descent, 0.3);
    const Trajectory a = propagate(Vector::Ones(3), t, r, 3, 0);
    const Trajectory b = propagate(Vector::Zero(3), t, r, 3, 0);
    EXPECT_THROW(compose(a, b), InvalidArgument);
}

TEST(EnsemblePropagate, SingleRealizationIsPropagate) {
    const QuadraticTask t = random_task(3, 11);
    const StepRule r = rule_of(StepKind::langevin, 0.05, 1.0);
    const thermo::GaussianState q0(Vector::Zero(3), Matrix::Identity(3, 3));
    const auto ens = ensemble_propagate(q0, t, r, 20, 1, 31);
    ASSERT_EQ(ens.size(), 1u);
    const Trajectory direct = propagate(ensemble_initial_state(q0, 31, 0), t, r, 20, 31);
    EXPECT_EQ(ens[0].final_state(), direct.final_state());
}

TEST(EnsemblePropagate, Deterministic) {
    const QuadraticTask t = random_task(3, 12);
    const StepRule r = rule_of(StepKind::noisy_gradient, 0.05, 1.0);
    const thermo::GaussianState q0(Vector::Zero(3), Matrix::Identity(3, 3));
    const auto a = ensemble_propagate(q0, t, r, 15, 16, 8, 1);
    const auto b = ensemble_propagate(q0, t, r, 15, 16, 8, 4);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].final_state(), b[i].final_state());
}

TEST(EnsemblePropagate, MomentsMatchClosedForm) {
    const int d = 3, n = 4096, k = 25;
    const QuadraticTask t = random_task(d, 13, 2.0);
    const StepRule r = rule_of(StepKind::langevin, 0.05, 0.5);
    Vector mu0(d);
    mu0 << 1.0, -0.5, 2.0;
    const thermo::GaussianState q0(mu0, 0.3 * Matrix::Identity(d, d));
    const auto ens = ensemble_propagate(q0, t, r, k, n, 2024, 0, false);
    thermo::GaussianState closed = q0;
    for (int i = 0; i < k; ++i) closed = thermo::evolve_gaussian(closed, t, r);

    Vector mean = Vector::Zero(d);
    for (const auto& tr : ens) mean += tr.final_state() / n;
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& tr : ens) {
        const Vector c = tr.final_state() - mean;
        cov += c * c.transpose() / (n - 1);
    }
    const Matrix& s = closed.covariance();
    for (int i = 0; i < d; ++i) {
        EXPECT_LE(std::abs(mean(i) - closed.mean()(i)), 3.0 * std::sqrt(s(i, i) / n)) << "mean " << i;
        for (int j = 0; j < d; ++j) {
            const double se = std::sqrt((s(i, i) * s(j, j) + s(i, j) * s(i, j)) / n);
            EXPECT_LE(std::abs(cov(i, j) - s(i, j)), 3.0 * se) << "cov " << i << "," << j;
        }
    }
}
