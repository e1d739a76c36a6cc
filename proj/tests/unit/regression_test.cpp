#include <gtest/gtest.h>

#include <algorithm>

#include "test_util.hpp"

using namespace sindykit;

namespace {

LibraryMatrix as_library(const Eigen::MatrixXd& a) {
    LibraryMatrix lib;
    lib.values = a;
    std::vector<int> e(static_cast<std::size_t>(a.cols()), 0);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        auto ej = e;
        ej[static_cast<std::size_t>(j)] = 1;
        lib.terms.push_back(TermDescriptor::monomial(ej));
    }
    return lib;
}

std::set<Eigen::Index> active(const Eigen::VectorXd& v) {
    const auto nz = testutil::nonzeros(v);
    return {nz.begin(), nz.end()};
}

// The 40x6 instance: xi = (2, 0, -3, 0, 0, 0).
struct Instance {
    Eigen::MatrixXd a;
    Eigen::VectorXd xi, b;
};

Instance instance_40x6() {
    Instance in;
    in.a = testutil::gaussian(40, 6, 2024);
    in.xi = testutil::vec({2, 0, -3, 0, 0, 0});
    in.b = in.a * in.xi;
    return in;
}

}  // namespace

TEST(LeastSquares, Identity) {
    const auto x = least_squares(Eigen::MatrixXd::Identity(3, 3), testutil::vec({1, 2, 3}));
    EXPECT_LE((x - testutil::vec({1, 2, 3})).norm(), 1e-14);
}

TEST(LeastSquares, MeanOfConstant) {
    const auto x = least_squares(Eigen::MatrixXd::Ones(4, 1), testutil::vec({2, 2, 2, 2}));
    EXPECT_NEAR(x[0], 2.0, 1e-14);
}

TEST(LeastSquares, ConsistentTallSystem) {
    Eigen::MatrixXd a(3, 2);
    a << 1, 0, 0, 1, 1, 1;
    const auto x = least_squares(a, testutil::vec({1, 1, 2}));
    EXPECT_NEAR(x[0], 1.0, 1e-14);
    EXPECT_NEAR(x[1], 1.0, 1e-14);
}

TEST(LeastSquares, RankDeficientGivesMinimumNorm) {
    Eigen::MatrixXd a(4, 2);
    a << 1, 1, 2, 2, 3, 3, 4, 4;
    const auto sol = solve_least_squares(a, testutil::vec({2, 4, 6, 8}));
    EXPECT_EQ(sol.rank, 1);
    EXPECT_NEAR(sol.x(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(sol.x(1, 0), 1.0, 1e-12);
}

TEST(LeastSquares, EmptyMatrix) {
    EXPECT_THROW(solve_least_squares(Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 1)), ContractViolation);
}

TEST(Stlsq, LinearOscillatorTrajectory) {
    auto spec = SystemSpec::make(SystemKind::Linear2D, 0.0, 25.0, 0.01);
    const auto ds = simulate(spec);
    const auto lib = build_matrix(LibrarySpec{2, 1, {}, false}, ds.states);
    const auto res = stlsq(lib, *ds.derivatives, StlsqConfig{0.05, 10, Convergence::SupportStable});
    Eigen::MatrixXd want(2, 2);
    want << -0.1, -2, 2, -0.1;
    EXPECT_LE((res.model.coefficients - want).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Stlsq, ZeroTargetGivesZeroAndFlags) {
    const auto lib = as_library(testutil::gaussian(30, 5, 1));
    const auto res = stlsq(lib, Eigen::MatrixXd::Zero(30, 2), StlsqConfig{});
    EXPECT_EQ(res.model.nnz(), 0);
    EXPECT_TRUE(res.report.zero_target[0]);
    EXPECT_TRUE(res.report.empty_support[1]);
}

TEST(Stlsq, SeededInstanceMatchesOracle) {
    const auto in = instance_40x6();
    const auto oracle = testutil::best_subset(in.a, in.b, 0.5);
    EXPECT_EQ(oracle.support, (std::vector<Eigen::Index>{0, 2}));
    const auto res = stlsq(as_library(in.a), in.b, StlsqConfig{0.5, 10, Convergence::SupportStable});
    const Eigen::VectorXd xi = res.model.coefficients.col(0);
    EXPECT_LE((xi - in.xi).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LE((xi - oracle.coefficients).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Stlsq, HugeThresholdEmptiesSupport) {
    const auto in = instance_40x6();
    const auto res = stlsq(as_library(in.a), in.b, StlsqConfig{100.0, 10, Convergence::SupportStable});
    EXPECT_EQ(res.model.nnz(), 0);
    EXPECT_TRUE(res.report.empty_support[0]);
}

TEST(Stlsq, RejectsBadConfig) {
    const auto in = instance_40x6();
    EXPECT_THROW(stlsq(as_library(in.a), in.b, StlsqConfig{-1.0, 10, Convergence::SupportStable}),
                 ContractViolation);
    EXPECT_THROW(stlsq(as_library(in.a), in.b, StlsqConfig{0.1, 0, Convergence::SupportStable}), ContractViolation);
}

TEST(Stlsq, SurvivorsAreAtLeastLambda) {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Eigen::MatrixXd a = testutil::gaussian(30, 10, seed);
        const Eigen::MatrixXd b = testutil::gaussian(30, 3, seed + 100);
        for (auto conv : {Convergence::SupportStable, Convergence::FixedIterations})
            for (int cap : {1, 3, 10}) {
                const double lambda = 0.05 + 0.01 * static_cast<double>(seed);
                const auto res = stlsq(as_library(a), b, StlsqConfig{lambda, cap, conv});
                for (Eigen::Index i = 0; i < res.model.coefficients.size(); ++i) {
                    const double v = res.model.coefficients.data()[i];
                    if (v != 0.0) {
                        EXPECT_GE(std::abs(v), lambda);
                    }
                }
            }
    }
}

TEST(Stlsq, FixedPointOnOwnSupport) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Eigen::MatrixXd a = testutil::gaussian(50, 8, seed);
        Eigen::VectorXd xi = testutil::gaussian(8, 1, seed + 7).col(0);
        xi[1] = xi[4] = xi[6] = 0.0;
        const Eigen::VectorXd b = a * xi + 0.05 * testutil::gaussian(50, 1, seed + 9).col(0);
        const StlsqConfig cfg{0.2, 10, Convergence::SupportStable};
        const auto first = stlsq(as_library(a), b, cfg);
        const Eigen::VectorXd x1 = first.model.coefficients.col(0);
        const auto cols = testutil::nonzeros(x1);
        if (cols.empty()) continue;
        Eigen::MatrixXd sub(50, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(cols[k]);
        const auto again = stlsq(as_library(sub), b, cfg);
        for (std::size_t k = 0; k < cols.size(); ++k)
            EXPECT_NEAR(again.model.coefficients(static_cast<Eigen::Index>(k), 0), x1[cols[k]], 1e-12);
    }
}

TEST(Stlsq, SupportNeverGrowsAcrossIterations) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Eigen::MatrixXd a = testutil::gaussian(25, 12, seed + 300);
        const Eigen::VectorXd b = testutil::gaussian(25, 1, seed + 600).col(0);
        std::set<Eigen::Index> prev;
        for (Eigen::Index j = 0; j < 12; ++j) prev.insert(j);
        for (int cap = 1; cap <= 10; ++cap) {
            const auto res = stlsq(as_library(a), b, StlsqConfig{0.15, cap, Convergence::FixedIterations});
            const auto now = active(res.model.coefficients.col(0));
            EXPECT_TRUE(std::includes(prev.begin(), prev.end(), now.begin(), now.end())) << seed << " " << cap;
            prev = now;
        }
    }
}

TEST(Stlsq, ColumnOrderIndependent) {
    const Eigen::MatrixXd a = testutil::gaussian(60, 9, 11);
    const Eigen::MatrixXd b = testutil::gaussian(60, 4, 12);
    const StlsqConfig cfg{0.1, 10, Convergence::SupportStable};
    const auto joint = stlsq(as_library(a), b, cfg);
    Eigen::MatrixXd rev = b.rowwise().reverse();
    const auto reversed = stlsq(as_library(a), rev, cfg);
    for (Eigen::Index k = 0; k < 4; ++k) {
        const auto single = stlsq(as_library(a), Eigen::MatrixXd(b.col(k)), cfg);
        EXPECT_TRUE((single.model.coefficients.col(0).array() == joint.model.coefficients.col(k).array()).all());
        EXPECT_TRUE((reversed.model.coefficients.col(3 - k).array() == joint.model.coefficients.col(k).array()).all());
    }
}

TEST(Stlsq, ThreadCountDoesNotChangeResult) {
    const Eigen::MatrixXd a = testutil::gaussian(60, 9, 21);
    const Eigen::MatrixXd b = testutil::gaussian(60, 5, 22);
    const StlsqConfig cfg{0.1, 10, Convergence::SupportStable};
    setenv("SINDYKIT_THREADS", "1", 1);
    const auto serial = stlsq(as_library(a), b, cfg);
    setenv("SINDYKIT_THREADS", "4", 1);
    const auto threaded = stlsq(as_library(a), b, cfg);
    unsetenv("SINDYKIT_THREADS");
    EXPECT_TRUE((serial.model.coefficients.array() == threaded.model.coefficients.array()).all());
}

TEST(Stlsq, OracleEquivalenceOnRandomInstances) {
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Eigen::MatrixXd a = testutil::gaussian(40, 8, 9000 + seed);
        std::mt19937_64 gen(seed);
        std::vector<Eigen::Index> idx(8);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), gen);
        std::uniform_real_distribution<double> mag(0.5, 3.0);
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(8);
        for (int k = 0; k < 3; ++k) xi[idx[static_cast<std::size_t>(k)]] = (gen() % 2 ? 1.0 : -1.0) * mag(gen);
        double smallest = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < 8; ++j)
            if (xi[j] != 0.0) smallest = std::min(smallest, std::abs(xi[j]));
        const double lambda = 0.5 * smallest;
        const Eigen::VectorXd b = a * xi;
        const auto oracle = testutil::best_subset(a, b, lambda);
        const auto res = stlsq(as_library(a), b, StlsqConfig{lambda, 10, Convergence::SupportStable});
        const Eigen::VectorXd got = res.model.coefficients.col(0);
        if (testutil::nonzeros(got) == oracle.support) {
            ++agree;
            EXPECT_LE((got - oracle.coefficients).lpNorm<Eigen::Infinity>(), 1e-8);
        }
    }
    EXPECT_GE(agree, 95);
}

TEST(Lasso, ZeroPenaltyIsLeastSquares) {
    const Eigen::MatrixXd a = testutil::gaussian(40, 6, 5);
    const Eigen::VectorXd b = testutil::gaussian(40, 1, 6).col(0);
    const auto res = lasso_cd(a, b, LassoConfig{0.0, 1e-13, 100000});
    EXPECT_TRUE(res.converged);
    EXPECT_LE((res.coefficients - least_squares(a, b)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Lasso, LargePenaltyShrinksToZero) {
    const Eigen::MatrixXd a = testutil::gaussian(20, 1, 3);
    const Eigen::VectorXd b = testutil::gaussian(20, 1, 4).col(0);
    const double corr = std::abs(a.col(0).normalized().dot(b));
    const auto res = lasso_cd(a, b, LassoConfig{2.0 * corr + 1e-9, 1e-12, 1000});
    EXPECT_EQ(res.coefficients[0], 0.0);
}

TEST(Lasso, SeededInstanceSupport) {
    const auto in = instance_40x6();
    const auto res = lasso_cd(in.a, in.b, LassoConfig{0.5, 1e-12, 100000});
    EXPECT_EQ(testutil::nonzeros(res.coefficients), (std::vector<Eigen::Index>{0, 2}));
    EXPECT_NEAR(res.coefficients[0], 2.0, 0.05 * 2.0);
    EXPECT_NEAR(res.coefficients[2], -3.0, 0.05 * 3.0);
}

TEST(Lasso, ReportsNonConvergence) {
    const Eigen::MatrixXd a = testutil::gaussian(40, 6, 5);
    const Eigen::VectorXd b = testutil::gaussian(40, 1, 6).col(0);
    const auto res = lasso_cd(a, b, LassoConfig{0.0, 1e-300, 2});
    EXPECT_FALSE(res.converged);
    EXPECT_EQ(res.sweeps, 2);
}

TEST(Fit, ContinuousNeedsDerivatives) {
    const auto ds = make_dataset(Eigen::VectorXd::LinSpaced(20, 0, 1), testutil::gaussian(20, 2, 1));
    EXPECT_THROW(fit(ds, LibrarySpec{2, 2, {}, true}, StlsqConfig{}), DataError);
}

TEST(Fit, UnderdeterminedIsDataError) {
    auto ds = make_dataset(Eigen::VectorXd::LinSpaced(5, 0, 1), testutil::gaussian(5, 2, 1),
                           testutil::gaussian(5, 2, 2));
    EXPECT_THROW(fit(ds, LibrarySpec{2, 3, {}, true}, StlsqConfig{}), DataError);
}

TEST(Fit, DiscreteConstantStates) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(30, 1, 0.37);
    const auto ds = make_dataset(Eigen::VectorXd::LinSpaced(30, 0, 29), x);
    const auto res = fit(ds, LibrarySpec{1, 0, {}, true}, StlsqConfig{0.01, 10, Convergence::SupportStable},
                         TimeMode::DiscreteTime);
    EXPECT_NEAR(res.model.coefficients(0, 0), 0.37, 1e-14);
}

TEST(Fit, DiscreteLinearIsDmd2x2) {
    Eigen::Matrix2d a;
    a << 0.9, -0.2, 0.1, 0.8;
    Eigen::MatrixXd x(50, 2);
    x.row(0) << 1.0, -0.5;
    for (int k = 1; k < 50; ++k) x.row(k) = (a * x.row(k - 1).transpose()).transpose();
    const auto ds = make_dataset(Eigen::VectorXd::LinSpaced(50, 0, 49), x);
    // Two-point trajectories only span the orbit; add a second segment to fill the plane.
    Eigen::MatrixXd y(50, 2);
    y.row(0) << 0.3, 1.0;
    for (int k = 1; k < 50; ++k) y.row(k) = (a * y.row(k - 1).transpose()).transpose();
    const auto both = concatenate({ds, make_dataset(Eigen::VectorXd::LinSpaced(50, 0, 49), y)});
    const auto res = fit(both, LibrarySpec{2, 1, {}, false}, StlsqConfig{1e-6, 10, Convergence::SupportStable},
                         TimeMode::DiscreteTime);
    EXPECT_LE((res.model.coefficients.transpose() - Eigen::MatrixXd(a)).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Fit, DiscretePairsStayInsideSegments) {
    const Eigen::MatrixXd x1 = Eigen::MatrixXd::Constant(10, 1, 1.0), x2 = Eigen::MatrixXd::Constant(10, 1, 5.0);
    const auto ds = concatenate({make_dataset(Eigen::VectorXd::LinSpaced(10, 0, 9), x1),
                                 make_dataset(Eigen::VectorXd::LinSpaced(10, 0, 9), x2)});
    const auto prob = make_problem(ds, LibrarySpec{1, 1, {}, true}, TimeMode::DiscreteTime);
    EXPECT_EQ(prob.theta.rows(), 18);
    EXPECT_LE((prob.target - prob.theta.values.col(1)).norm(), 0.0);
}
