#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sindykit/errors.hpp"

namespace sindykit {

enum class TermKind { Monomial, Sine, Cosine };

inline const char* to_string(TermKind k) {
    switch (k) {
        case TermKind::Monomial: return "Monomial";
        case TermKind::Sine: return "Sine";
        case TermKind::Cosine: return "Cosine";
    }
    return "?";
}

inline TermKind term_kind_from_string(const std::string& s) {
    if (s == "Monomial") return TermKind::Monomial;
    if (s == "Sine") return TermKind::Sine;
    if (s == "Cosine") return TermKind::Cosine;
    throw ContractViolation("unknown term kind '" + s + "'");
}

/// Symbolic identity of one candidate function.
///
/// Monomials carry one power per state variable. Trig terms reuse the
/// exponent vector as a one-hot marker of the variable they act on and carry
/// the harmonic k of sin(k x_i) / cos(k x_i).
struct TermDescriptor {
    TermKind kind = TermKind::Monomial;
    std::vector<int> exponents;
    int harmonic = 1;

    static TermDescriptor monomial(std::vector<int> exps) {
        TermDescriptor t;
        t.kind = TermKind::Monomial;
        t.exponents = std::move(exps);
        t.harmonic = 1;
        return t;
    }

    static TermDescriptor trig(TermKind kind, std::size_t n_states, std::size_t variable, int harmonic) {
        detail::require(kind != TermKind::Monomial, "trig term needs Sine or Cosine kind");
        detail::require(variable < n_states, "trig variable index out of range");
        detail::require(harmonic >= 1, "harmonic must be positive");
        TermDescriptor t;
        t.kind = kind;
        t.exponents.assign(n_states, 0);
        t.exponents[variable] = 1;
        t.harmonic = harmonic;
        return t;
    }

    int degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

    bool is_constant() const { return kind == TermKind::Monomial && degree() == 0; }

    /// Index of the variable a trig term acts on.
    std::size_t variable() const {
        for (std::size_t i = 0; i < exponents.size(); ++i)
            if (exponents[i] != 0) return i;
        return 0;
    }

    /// Evaluates this term at one state vector.
    template <class Vec>
    double evaluate(const Vec& x) const {
        if (kind == TermKind::Monomial) {
            double v = 1.0;
            for (std::size_t i = 0; i < exponents.size(); ++i)
                for (int e = 0; e < exponents[i]; ++e) v *= x[static_cast<Eigen::Index>(i)];
            return v;
        }
        const double arg = harmonic * x[static_cast<Eigen::Index>(variable())];
        return kind == TermKind::Sine ? std::sin(arg) : std::cos(arg);
    }

    /// Appendix-style label: '1', 'x', 'xxy', 'sin(2y)'.
    std::string name(const std::vector<std::string>& state_names) const {
        if (kind == TermKind::Monomial) {
            std::string s;
            for (std::size_t i = 0; i < exponents.size(); ++i)
                for (int e = 0; e < exponents[i]; ++e) s += state_names.at(i);
            return s.empty() ? "1" : s;
        }
        std::string s = kind == TermKind::Sine ? "sin(" : "cos(";
        if (harmonic != 1) s += std::to_string(harmonic);
        s += state_names.at(variable());
        s += ")";
        return s;
    }

    friend bool operator==(const TermDescriptor&, const TermDescriptor&) = default;
};

/// x, y, z, w for up to four states, x1..xn beyond that.
inline std::vector<std::string> default_state_names(std::size_t n) {
    static const char* letters[] = {"x", "y", "z", "w"};
    std::vector<std::string> names;
    names.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        names.push_back(n <= 4 ? std::string(letters[i]) : "x" + std::to_string(i + 1));
    return names;
}

}  // namespace sindykit
