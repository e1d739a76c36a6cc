#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace sindykit;

namespace {

Eigen::VectorXd grid(Eigen::Index m, double t0, double dt) {
    return Eigen::VectorXd::LinSpaced(m, t0, t0 + dt * static_cast<double>(m - 1));
}

double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::sqrt(static_cast<double>(a.size()));
}

// Dense damped Newton on the same objective, written from scratch.
Eigen::VectorXd dense_tv_oracle(const Eigen::VectorXd& f, double alpha, double dt, double eps) {
    const Eigen::Index m = f.size();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 1; i < m; ++i) {
        a(i, 0) = 0.5 * dt;
        for (Eigen::Index j = 1; j < i; ++j) a(i, j) = dt;
        a(i, i) = 0.5 * dt;
    }
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m - 1, m);
    for (Eigen::Index i = 0; i + 1 < m; ++i) {
        d(i, i) = -1.0;
        d(i, i + 1) = 1.0;
    }
    const Eigen::VectorXd data = f.array() - f[0];
    auto obj = [&](const Eigen::VectorXd& u) {
        const Eigen::ArrayXd du = (d * u).array();
        return alpha * (du.square() + eps).sqrt().sum() + 0.5 * (a * u - data).squaredNorm();
    };
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    for (int it = 0; it < 500; ++it) {
        const Eigen::ArrayXd du = (d * u).array();
        const Eigen::ArrayXd s = (du.square() + eps).sqrt();
        const Eigen::VectorXd g = alpha * d.transpose() * (du / s).matrix() + a.transpose() * (a * u - data);
        const Eigen::MatrixXd h =
            alpha * d.transpose() * (eps / s.cube()).matrix().asDiagonal() * d + a.transpose() * a;
        const Eigen::VectorXd step = h.ldlt().solve(g);
        double t = 1.0;
        const double j0 = obj(u);
        while (obj(u - t * step) > j0 - 1e-4 * t * g.dot(step) && t > 1e-12) t *= 0.5;
        u -= t * step;
        if (t * step.lpNorm<Eigen::Infinity>() < 1e-13) break;
    }
    return u;
}

}  // namespace

TEST(CentralDifference, LinearIsExact) {
    const auto t = grid(50, 0.0, 0.1);
    const auto d = central_difference(t, t);
    EXPECT_LE((d.col(0) - Eigen::VectorXd::Ones(50)).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(CentralDifference, QuadraticInterior) {
    const auto t = grid(40, 0.0, 0.1);
    const Eigen::VectorXd x = t.array().square();
    const auto d = central_difference(t, x);
    for (Eigen::Index i = 1; i + 1 < 40; ++i) EXPECT_NEAR(d(i, 0), 2.0 * t[i], 1e-12);
}

TEST(CentralDifference, SinErrorBound) {
    const auto m = static_cast<Eigen::Index>(std::floor(2.0 * M_PI / 0.01)) + 1;
    const auto t = grid(m, 0.0, 0.01);
    const Eigen::VectorXd x = t.array().sin();
    const auto d = central_difference(t, x);
    EXPECT_LT((d.col(0) - Eigen::VectorXd(t.array().cos())).lpNorm<Eigen::Infinity>(), 2e-5);
}

TEST(CentralDifference, AffineExactOnRandomGrids) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 gen(seed);
        std::uniform_real_distribution<double> step(0.05, 0.5), coef(-5.0, 5.0);
        Eigen::VectorXd t(30);
        t[0] = coef(gen);
        for (int i = 1; i < 30; ++i) t[i] = t[i - 1] + step(gen);
        const double a = coef(gen), b = coef(gen);
        const Eigen::VectorXd x = (a * t.array() + b).matrix();
        const auto d = central_difference(t, x);
        EXPECT_LE((d.col(0).array() - a).abs().maxCoeff(), 1e-11 * (1.0 + std::abs(a)));
    }
}

TEST(CentralDifference, RespectsSegments) {
    const auto t = grid(20, 0.0, 0.1);
    const Eigen::VectorXd up = t, flat = Eigen::VectorXd::Constant(20, 3.0);
    auto ds = concatenate({make_dataset(t, up), make_dataset(t, flat)});
    ds = with_central_difference(ds);
    EXPECT_LE(((*ds.derivatives).col(0).head(20).array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_LE((*ds.derivatives).col(0).tail(20).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CentralDifference, TooFewSamples) {
    EXPECT_THROW(central_difference(grid(2, 0, 1), Eigen::MatrixXd::Zero(2, 1)), DataError);
}

TEST(TvDerivative, RampGivesConstant) {
    const double dt = 0.01;
    const auto t = grid(201, 0.0, dt);
    const Eigen::VectorXd f = 3.0 * t;
    TvDiffConfig cfg;
    cfg.dt = dt;
    cfg.alpha = 0.01;
    const auto u = tv_derivative(f, cfg);
    EXPECT_LE((u.array() - 3.0).abs().maxCoeff(), 1e-6);
}

TEST(TvDerivative, AbsoluteValueGivesSign) {
    const double dt = 0.01;
    const auto t = grid(201, -1.0, dt);
    const Eigen::VectorXd f = t.array().abs();
    TvDiffConfig cfg;
    cfg.dt = dt;
    cfg.alpha = 1e-3;
    cfg.epsilon = 1e-6;
    cfg.iterations = 200;
    const auto u = tv_derivative(f, cfg);
    int transition = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double want = t[i] > 1e-12 ? 1.0 : (t[i] < -1e-12 ? -1.0 : 0.0);
        if (std::abs(u[i] - want) > 0.1) ++transition;
    }
    EXPECT_LE(transition, 3);
    const auto oracle = dense_tv_oracle(f, cfg.alpha, dt, cfg.epsilon);
    EXPECT_LE((u - oracle).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(TvDerivative, MatchesDenseOracleOnNoisySin) {
    const double dt = 0.01;
    const auto t = grid(150, 0.0, dt);
    const Eigen::VectorXd f = Eigen::VectorXd(t.array().sin()) + noise_matrix(150, 1, 0.01, 17).col(0);
    TvDiffConfig cfg;
    cfg.dt = dt;
    cfg.alpha = 0.01;
    cfg.epsilon = 1e-4;
    cfg.iterations = 300;
    const auto tr = tv_derivative_trace(f, cfg);
    const auto oracle = dense_tv_oracle(f, cfg.alpha, dt, cfg.epsilon);
    const Eigen::VectorXd data = f.array() - f[0];
    EXPECT_LE(tr.objective.back(), detail::tv_objective(oracle, data, cfg) * (1.0 + 1e-6));
    EXPECT_LE((tr.derivative - oracle).lpNorm<Eigen::Infinity>(), 1e-3);
}

TEST(TvDerivative, BeatsCentralDifferenceOnNoisySin) {
    const double dt = 0.01;
    const auto m = static_cast<Eigen::Index>(std::floor(2.0 * M_PI / dt)) + 1;
    const auto t = grid(m, 0.0, dt);
    const Eigen::VectorXd f = Eigen::VectorXd(t.array().sin()) + noise_matrix(m, 1, 0.01, 5).col(0);
    TvDiffConfig cfg;
    cfg.dt = dt;
    cfg.alpha = 0.01;
    const Eigen::VectorXd truth = t.array().cos();
    const double tv = rmse(tv_derivative(f, cfg), truth);
    const double cd = rmse(central_difference(t, f).col(0), truth);
    EXPECT_LE(tv, 0.5 * cd);
}

TEST(TvDerivative, ObjectiveNeverIncreases) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double dt = 0.02;
        const auto t = grid(300, 0.0, dt);
        const Eigen::VectorXd f =
            Eigen::VectorXd((2.0 * t.array()).sin() + 0.3 * t.array()) + noise_matrix(300, 1, 0.05, seed).col(0);
        TvDiffConfig cfg;
        cfg.dt = dt;
        cfg.alpha = 0.001 * static_cast<double>(seed + 1);
        const auto tr = tv_derivative_trace(f, cfg);
        ASSERT_GE(tr.objective.size(), 2u);
        for (std::size_t k = 1; k < tr.objective.size(); ++k) EXPECT_LE(tr.objective[k], tr.objective[k - 1]);
    }
}

TEST(TvDerivative, Preconditions) {
    TvDiffConfig cfg;
    EXPECT_THROW(tv_derivative(Eigen::VectorXd::Zero(4), cfg), DataError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(10);
    bad[3] = std::nan("");
    EXPECT_THROW(tv_derivative(bad, cfg), DataError);
    cfg.alpha = 0.0;
    EXPECT_THROW(tv_derivative(Eigen::VectorXd::Zero(10), cfg), ContractViolation);
}

TEST(TvDerivative, NonUniformGridRejected) {
    Eigen::VectorXd t = grid(20, 0.0, 0.1);
    t[10] += 0.03;
    const auto ds = make_dataset(t, Eigen::MatrixXd(t));
    TvDiffConfig cfg;
    cfg.dt = 0.1;
    EXPECT_THROW(with_tv_derivative(ds, cfg), DataError);
}

TEST(TvDerivative, SkippedColumnsGetZero) {
    const auto t = grid(30, 0.0, 0.1);
    Eigen::MatrixXd x(30, 2);
    x.col(0) = t;
    x.col(1).setConstant(0.4);
    TvDiffConfig cfg;
    cfg.dt = 0.1;
    const auto ds = with_tv_derivative(make_dataset(t, x, std::nullopt, {"x", "u"}), cfg, {"u"});
    EXPECT_EQ((*ds.derivatives).col(1), Eigen::VectorXd::Zero(30));
}

TEST(Noise, ZeroEtaIsIdentity) {
    auto ds = simulate(SystemSpec::make(SystemKind::Linear2D, 0.0, 1.0, 0.01));
    const auto out = add_noise(ds, NoiseSpec{0.0, NoiseTarget::Both, 3});
    EXPECT_TRUE((out.states.array() == ds.states.array()).all());
    EXPECT_TRUE((out.derivatives->array() == ds.derivatives->array()).all());
}

TEST(Noise, DeterministicAndLinearInEta) {
    auto ds = simulate(SystemSpec::make(SystemKind::Lorenz, 0.0, 1.0, 0.01));
    const auto a = add_noise(ds, NoiseSpec{1.0, NoiseTarget::Derivatives, 9});
    const auto b = add_noise(ds, NoiseSpec{1.0, NoiseTarget::Derivatives, 9});
    const auto c = add_noise(ds, NoiseSpec{2.0, NoiseTarget::Derivatives, 9});
    EXPECT_TRUE((a.derivatives->array() == b.derivatives->array()).all());
    const Eigen::MatrixXd d1 = *a.derivatives - *ds.derivatives, d2 = *c.derivatives - *ds.derivatives;
    EXPECT_LE((d2 - 2.0 * d1).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_TRUE((noise_matrix(5, 3, 2.0, 4).array() == 2.0 * noise_matrix(5, 3, 1.0, 4).array()).all());
}

TEST(Noise, BothTargetsUseDistinctDraws) {
    auto ds = simulate(SystemSpec::make(SystemKind::Linear2D, 0.0, 1.0, 0.01));
    const auto out = add_noise(ds, NoiseSpec{0.1, NoiseTarget::Both, 3});
    const Eigen::MatrixXd ns = out.states - ds.states, nd = *out.derivatives - *ds.derivatives;
    EXPECT_GT((ns - nd).norm(), 0.1);
}

TEST(Noise, NeedsDerivatives) {
    const auto ds = make_dataset(grid(5, 0, 1), Eigen::MatrixXd::Zero(5, 1));
    EXPECT_THROW(add_noise(ds, NoiseSpec{1.0, NoiseTarget::Derivatives, 0}), DataError);
}

TEST(TrimSegments, DropsEdgesPerSegment) {
    const auto t = grid(20, 0.0, 0.1);
    const auto ds = concatenate({make_dataset(t, Eigen::MatrixXd(t)), make_dataset(grid(6, 0.0, 0.1), Eigen::MatrixXd::Ones(6, 1))});
    const auto out = trim_segments(ds, 3);
    EXPECT_EQ(out.rows(), 14);
    EXPECT_EQ(out.segment_count(), 1u);
    EXPECT_EQ(out.times[0], t[3]);
    EXPECT_EQ(trim_segments(ds, 0).rows(), 26);
    EXPECT_THROW(trim_segments(ds, 10), DataError);
}
