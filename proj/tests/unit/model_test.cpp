#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace sindykit;

namespace {

SparseModel linear2d_model() {
    LibrarySpec lib{2, 1, {}, true};
    auto m = zero_model(enumerate_terms(lib), {"x", "y"});
    m.coefficients(1, 0) = -0.1;
    m.coefficients(1, 1) = -2.0;
    m.coefficients(2, 0) = 2.0;
    m.coefficients(2, 1) = -0.1;
    return m;
}

}  // namespace

TEST(EvaluateRhs, LinearModelAtUnitX) {
    const auto f = evaluate_rhs(linear2d_model(), testutil::vec({1.0, 0.0}));
    EXPECT_DOUBLE_EQ(f[0], -0.1);
    EXPECT_DOUBLE_EQ(f[1], -2.0);
}

TEST(EvaluateRhs, ZeroModelGivesZero) {
    LibrarySpec lib{3, 3, {1}, true};
    const auto m = zero_model(enumerate_terms(lib), {"x", "y", "z"});
    const auto f = evaluate_rhs(m, testutil::vec({1.5, -2.0, 40.0}));
    EXPECT_EQ(f, Eigen::VectorXd::Zero(3));
}

TEST(EvaluateRhs, LorenzAtInitialState) {
    const auto spec = SystemSpec::make(SystemKind::Lorenz);
    const auto m = reference_model(spec, LibrarySpec{3, 5, {}, true});
    const auto f = evaluate_rhs(m, testutil::vec({-8.0, 7.0, 27.0}));
    EXPECT_NEAR(f[0], 150.0, 1e-12);
    EXPECT_NEAR(f[1], -15.0, 1e-12);
    EXPECT_NEAR(f[2], -128.0, 1e-12);
}

TEST(EvaluateRhs, WrongLengthIsContractViolation) {
    EXPECT_THROW(evaluate_rhs(linear2d_model(), testutil::vec({1.0})), ContractViolation);
}

TEST(EvaluateRhs, LinearInCoefficients) {
    LibrarySpec lib{3, 3, {1}, true};
    const auto terms = enumerate_terms(lib);
    const auto p = static_cast<Eigen::Index>(terms.size());
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto m1 = zero_model(terms, {"x", "y", "z"});
        auto m2 = m1, mix = m1;
        m1.coefficients = testutil::gaussian(p, 3, seed);
        m2.coefficients = testutil::gaussian(p, 3, seed + 1000);
        const double a = 0.7 + 0.1 * static_cast<double>(seed), b = -1.3;
        mix.coefficients = a * m1.coefficients + b * m2.coefficients;
        const Eigen::VectorXd x = testutil::gaussian(3, 1, seed + 5000).col(0);
        const Eigen::VectorXd lhs = evaluate_rhs(mix, x);
        const Eigen::VectorXd rhs = a * evaluate_rhs(m1, x) + b * evaluate_rhs(m2, x);
        EXPECT_LE((lhs - rhs).lpNorm<Eigen::Infinity>(), 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>()));
    }
}

TEST(RenderTable, LinearModelRowsAndNonzeros) {
    LibrarySpec lib{2, 2, {}, true};
    auto m = zero_model(enumerate_terms(lib), {"x", "y"});
    m.coefficients(1, 0) = -0.1015;
    m.coefficients(1, 1) = -1.999;
    m.coefficients(2, 0) = 2.0;
    m.coefficients(2, 1) = -0.1;
    const auto table = render_table(m, 4);
    EXPECT_NE(table.find("'xdot'"), std::string::npos);
    EXPECT_NE(table.find("    'x'     [-0.1015]    [-1.9990]\n"), std::string::npos) << table;
    std::istringstream is(table);
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 7u);
    EXPECT_NE(lines[1].find("'1'"), std::string::npos);
    EXPECT_NE(lines[4].find("'xx'"), std::string::npos);
    EXPECT_EQ(m.nnz(), 4);
}

TEST(RenderTable, ZeroModelOrderOne) {
    auto m = zero_model(enumerate_terms(LibrarySpec{1, 1, {}, true}), {"x"});
    const auto table = render_table(m);
    EXPECT_EQ(table, "    ''     'xdot'\n    '1'    [0]\n    'x'    [0]\n");
}

TEST(RenderTable, ThreeStateOrderTwoHasTenRows) {
    auto m = zero_model(enumerate_terms(LibrarySpec{3, 2, {}, true}), {"x", "y", "z"});
    const auto table = render_table(m);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 11);
}

TEST(RenderTable, DiscreteHeaders) {
    auto m = zero_model(enumerate_terms(LibrarySpec{2, 1, {}, true}), {"x", "r"}, TimeMode::DiscreteTime);
    EXPECT_NE(render_table(m).find("'x_{k+1}'"), std::string::npos);
}

TEST(RenderTable, RoundTripIsBitExact) {
    LibrarySpec lib{3, 2, {1}, true};
    const auto terms = enumerate_terms(lib);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto m = zero_model(terms, {"x", "y", "z"});
        m.coefficients = testutil::gaussian(m.n_terms(), 3, seed);
        m.coefficients *= std::pow(10.0, static_cast<double>(seed) - 5.0);
        m.coefficients(0, 0) = 0.0;
        m.coefficients(1, 1) = 1.0 / 3.0;
        const auto back = testutil::parse_table(render_table(m), m.n_terms(), 3);
        EXPECT_TRUE((back.array() == m.coefficients.array()).all()) << "seed " << seed;
    }
}

TEST(Support, LorenzTable) {
    const auto m = reference_model(SystemSpec::make(SystemKind::Lorenz), LibrarySpec{3, 5, {}, true});
    const std::set<std::pair<std::string, Eigen::Index>> want = {{"x", 0}, {"y", 0}, {"x", 1}, {"y", 1},
                                                                 {"xz", 1}, {"z", 2}, {"xy", 2}};
    EXPECT_EQ(named_support(m), want);
}

TEST(Support, ZeroModelIsEmpty) {
    auto m = zero_model(enumerate_terms(LibrarySpec{2, 3, {}, true}), {"x", "y"});
    EXPECT_TRUE(support(m).empty());
}

TEST(ModelJson, RoundTrip) {
    const auto m = reference_model(SystemSpec::make(SystemKind::Lorenz), LibrarySpec{3, 2, {2}, true});
    const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
    EXPECT_EQ(back.state_names, m.state_names);
    EXPECT_EQ(back.n_terms(), m.n_terms());
    EXPECT_TRUE((back.coefficients.array() == m.coefficients.array()).all());
    for (std::size_t j = 0; j < m.terms.size(); ++j)
        EXPECT_EQ(back.terms[j].name(back.state_names), m.terms[j].name(m.state_names));
}

TEST(StateNames, DefaultsSwitchAfterFour) {
    EXPECT_EQ(default_state_names(4), (std::vector<std::string>{"x", "y", "z", "w"}));
    EXPECT_EQ(default_state_names(5)[4], "x5");
}
