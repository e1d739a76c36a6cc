#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sindykit/errors.hpp"
#include "sindykit/terms.hpp"

namespace sindykit {

inline constexpr int kMaxPolyOrder = 8;

/// Which candidate functions go into Theta(X).
struct LibrarySpec {
    int n_states = 1;
    int poly_order = 2;
    std::set<int> trig_harmonics;
    bool include_constant = true;

    void validate() const {
        detail::require(n_states >= 1, "library needs at least one state");
        detail::require(poly_order >= 0 && poly_order <= kMaxPolyOrder,
                        "poly_order must lie in [0, " + std::to_string(kMaxPolyOrder) + "]");
        for (int k : trig_harmonics) detail::require(k >= 1, "trig harmonics must be positive");
    }
};

namespace detail {

// Non-decreasing index tuples of length `degree` in lexicographic order give
// 'xx','xy','xz','yy',... which is the graded-lex order of the tables.
inline void enumerate_degree(int n, int degree, int start, std::vector<int>& exps,
                             std::vector<TermDescriptor>& out) {
    if (degree == 0) {
        out.push_back(TermDescriptor::monomial(exps));
        return;
    }
    for (int v = start; v < n; ++v) {
        ++exps[static_cast<std::size_t>(v)];
        enumerate_degree(n, degree - 1, v, exps, out);
        --exps[static_cast<std::size_t>(v)];
    }
}

}  // namespace detail

inline std::vector<TermDescriptor> enumerate_terms(const LibrarySpec& spec) {
    spec.validate();
    std::vector<TermDescriptor> terms;
    std::vector<int> exps(static_cast<std::size_t>(spec.n_states), 0);
    for (int d = spec.include_constant ? 0 : 1; d <= spec.poly_order; ++d)
        detail::enumerate_degree(spec.n_states, d, 0, exps, terms);
    const auto n = static_cast<std::size_t>(spec.n_states);
    for (int k : spec.trig_harmonics) {
        for (std::size_t i = 0; i < n; ++i) terms.push_back(TermDescriptor::trig(TermKind::Sine, n, i, k));
        for (std::size_t i = 0; i < n; ++i) terms.push_back(TermDescriptor::trig(TermKind::Cosine, n, i, k));
    }
    return terms;
}

/// Theta(X) together with the column labels.
struct LibraryMatrix {
    Eigen::MatrixXd values;
    std::vector<TermDescriptor> terms;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

/// Single-row Theta(x^T). `x` must be finite.
template <class Vec>
Eigen::VectorXd evaluate_terms(const std::vector<TermDescriptor>& terms, const Vec& x) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(terms.size()));
    for (std::size_t j = 0; j < terms.size(); ++j) row[static_cast<Eigen::Index>(j)] = terms[j].evaluate(x);
    return row;
}

inline Eigen::VectorXd evaluate_terms(const LibrarySpec& spec, const Eigen::VectorXd& x) {
    detail::require(x.size() == spec.n_states, "evaluate_terms: state length does not match library");
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i])) throw DataError("non-finite state entry in evaluate_terms");
    return evaluate_terms(enumerate_terms(spec), x);
}

/// Builds Theta(X) row by row through the same per-term evaluator used by
/// `evaluate_terms`, so row i equals the single-row evaluation exactly.
inline LibraryMatrix build_matrix(const std::vector<TermDescriptor>& terms, const Eigen::MatrixXd& X) {
    detail::require(X.rows() >= 1, "build_matrix needs at least one sample");
    for (const auto& t : terms)
        detail::require(static_cast<Eigen::Index>(t.exponents.size()) == X.cols(),
                        "build_matrix: data column count does not match library");
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            if (!std::isfinite(X(i, j)))
                throw DataError("non-finite entry in state data at row " + std::to_string(i));

    LibraryMatrix lib;
    lib.terms = terms;
    lib.values.resize(X.rows(), static_cast<Eigen::Index>(terms.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::VectorXd x = X.row(i).transpose();
        for (std::size_t j = 0; j < terms.size(); ++j) lib.values(i, static_cast<Eigen::Index>(j)) = terms[j].evaluate(x);
    }
    return lib;
}

inline LibraryMatrix build_matrix(const LibrarySpec& spec, const Eigen::MatrixXd& X) {
    detail::require(X.cols() == spec.n_states, "build_matrix: data column count does not match library");
    return build_matrix(enumerate_terms(spec), X);
}

/// Number of terms without enumerating them.
inline std::size_t term_count(const LibrarySpec& spec) {
    // C(n+d, d) computed incrementally, exact for the small sizes allowed here.
    std::size_t c = 1;
    for (int k = 1; k <= spec.poly_order; ++k)
        c = c * static_cast<std::size_t>(spec.n_states + k) / static_cast<std::size_t>(k);
    if (!spec.include_constant) c -= 1;
    return c + 2 * spec.trig_harmonics.size() * static_cast<std::size_t>(spec.n_states);
}

}  // namespace sindykit
