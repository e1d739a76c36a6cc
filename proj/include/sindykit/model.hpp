#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "sindykit/errors.hpp"
#include "sindykit/library.hpp"
#include "sindykit/terms.hpp"

namespace sindykit {

enum class TimeMode { ContinuousTime, DiscreteTime };

inline const char* to_string(TimeMode m) {
    return m == TimeMode::ContinuousTime ? "ContinuousTime" : "DiscreteTime";
}

inline TimeMode time_mode_from_string(const std::string& s) {
    if (s == "ContinuousTime") return TimeMode::ContinuousTime;
    if (s == "DiscreteTime") return TimeMode::DiscreteTime;
    throw ContractViolation("unknown time mode '" + s + "'");
}

/// An identified system: Xi (one column per state equation) labelled by the
/// library terms that index its rows.
struct SparseModel {
    std::vector<TermDescriptor> terms;
    Eigen::MatrixXd coefficients;
    std::vector<std::string> state_names;
    TimeMode mode = TimeMode::ContinuousTime;

    Eigen::Index n_states() const { return static_cast<Eigen::Index>(state_names.size()); }
    Eigen::Index n_terms() const { return static_cast<Eigen::Index>(terms.size()); }

    void validate() const {
        detail::require(coefficients.rows() == n_terms(), "coefficient rows must equal term count");
        detail::require(coefficients.cols() == n_states(), "coefficient columns must equal state count");
    }

    Eigen::Index nnz() const { return (coefficients.array() != 0.0).count(); }
};

inline SparseModel zero_model(std::vector<TermDescriptor> terms, std::vector<std::string> names,
                              TimeMode mode = TimeMode::ContinuousTime) {
    SparseModel m;
    m.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(terms.size()),
                                           static_cast<Eigen::Index>(names.size()));
    m.terms = std::move(terms);
    m.state_names = std::move(names);
    m.mode = mode;
    return m;
}

/// f(x) = Theta(x^T) Xi, evaluated only over rows with a nonzero coefficient.
inline Eigen::VectorXd evaluate_rhs(const SparseModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.n_states())
        throw ContractViolation("evaluate_rhs: state has length " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(model.n_states()));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(model.n_states());
    for (Eigen::Index j = 0; j < model.n_terms(); ++j) {
        const auto row = model.coefficients.row(j);
        if ((row.array() == 0.0).all()) continue;
        out += model.terms[static_cast<std::size_t>(j)].evaluate(x) * row.transpose();
    }
    return out;
}

/// Nonzero (term row, equation column) positions of Xi.
using Support = std::set<std::pair<Eigen::Index, Eigen::Index>>;

inline Support support(const SparseModel& model) {
    Support s;
    for (Eigen::Index i = 0; i < model.coefficients.rows(); ++i)
        for (Eigen::Index k = 0; k < model.coefficients.cols(); ++k)
            if (model.coefficients(i, k) != 0.0) s.emplace(i, k);
    return s;
}

/// Support expressed with term names, e.g. {("xz", 1)}; handy in tests.
inline std::set<std::pair<std::string, Eigen::Index>> named_support(const SparseModel& model) {
    std::set<std::pair<std::string, Eigen::Index>> s;
    for (auto [i, k] : support(model)) s.emplace(model.terms[static_cast<std::size_t>(i)].name(model.state_names), k);
    return s;
}

inline Eigen::Index term_index(const SparseModel& model, const std::string& name) {
    for (std::size_t j = 0; j < model.terms.size(); ++j)
        if (model.terms[j].name(model.state_names) == name) return static_cast<Eigen::Index>(j);
    throw ContractViolation("model has no term named '" + name + "'");
}

inline double coefficient(const SparseModel& model, const std::string& term, Eigen::Index equation) {
    return model.coefficients(term_index(model, term), equation);
}

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string shortest_repr(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string fixed_repr(double v, int digits) {
    if (v == 0.0) return "0";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

inline std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace detail

/// Coefficient table in the appendix layout:
///
///     ''      'xdot'       'ydot'
///     '1'     [      0]    [      0]
///     'x'     [-0.1015]    [-1.9990]
///
/// `digits < 0` prints the shortest round-trip representation of every
/// entry, so the table can be parsed back exactly; `digits >= 0` prints a
/// fixed number of decimals for display.
inline std::string render_table(const SparseModel& model, int digits = -1) {
    model.validate();
    const auto n = static_cast<std::size_t>(model.n_states());
    std::vector<std::string> headers;
    for (const auto& s : model.state_names)
        headers.push_back("'" + (model.mode == TimeMode::ContinuousTime ? s + "dot" : s + "_{k+1}") + "'");
    std::vector<std::string> labels;
    std::vector<std::vector<std::string>> cells;
    std::size_t label_w = 2, cell_w = 1;
    for (Eigen::Index i = 0; i < model.n_terms(); ++i) {
        labels.push_back("'" + model.terms[static_cast<std::size_t>(i)].name(model.state_names) + "'");
        label_w = std::max(label_w, labels.back().size());
        std::vector<std::string> row;
        for (std::size_t k = 0; k < n; ++k) {
            const double v = model.coefficients(i, static_cast<Eigen::Index>(k));
            row.push_back(digits < 0 ? detail::shortest_repr(v) : detail::fixed_repr(v, digits));
            cell_w = std::max(cell_w, row.back().size());
        }
        cells.push_back(std::move(row));
    }
    const std::size_t col_w = cell_w + 2;
    std::ostringstream os;
    os << "    " << detail::pad_right("''", label_w + 4);
    for (std::size_t k = 0; k < n; ++k) os << detail::pad_right(headers[k], col_w + 4);
    os << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
        os << "    " << detail::pad_right(labels[i], label_w + 4);
        for (std::size_t k = 0; k < n; ++k) {
            os << detail::pad_right("[" + detail::pad_left(cells[i][k], cell_w) + "]", col_w + 4);
        }
        os << '\n';
    }
    std::string s = os.str();
    // Trailing blanks after the last column are noise in golden files.
    std::string trimmed;
    std::istringstream is(s);
    for (std::string line; std::getline(is, line);) {
        line.erase(line.find_last_not_of(' ') + 1);
        trimmed += line + '\n';
    }
    return trimmed;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const TermDescriptor& t) {
    return {{"kind", to_string(t.kind)}, {"exponents", t.exponents}, {"harmonic", t.harmonic}};
}

inline TermDescriptor term_from_json(const nlohmann::json& j) {
    TermDescriptor t;
    t.kind = term_kind_from_string(j.at("kind").get<std::string>());
    t.exponents = j.at("exponents").get<std::vector<int>>();
    t.harmonic = j.value("harmonic", 1);
    for (int e : t.exponents) detail::require(e >= 0, "term exponents must be non-negative");
    if (t.kind != TermKind::Monomial) detail::require(t.degree() == 1, "trig term must mark exactly one variable");
    return t;
}

inline nlohmann::json to_json(const SparseModel& m) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : m.terms) terms.push_back(to_json(t));
    nlohmann::json coeffs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.coefficients.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index k = 0; k < m.coefficients.cols(); ++k) row.push_back(m.coefficients(i, k));
        coeffs.push_back(row);
    }
    return {{"state_names", m.state_names}, {"mode", to_string(m.mode)}, {"terms", terms}, {"coefficients", coeffs}};
}

inline SparseModel model_from_json(const nlohmann::json& j) {
    SparseModel m;
    m.state_names = j.at("state_names").get<std::vector<std::string>>();
    m.mode = time_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& t : j.at("terms")) m.terms.push_back(term_from_json(t));
    const auto& rows = j.at("coefficients");
    m.coefficients.resize(static_cast<Eigen::Index>(rows.size()), m.n_states());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = rows[i].get<std::vector<double>>();
        detail::require(static_cast<Eigen::Index>(row.size()) == m.n_states(), "coefficient row length mismatch");
        for (std::size_t k = 0; k < row.size(); ++k)
            m.coefficients(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k];
    }
    for (const auto& t : m.terms)
        detail::require(static_cast<Eigen::Index>(t.exponents.size()) == m.n_states(),
                        "term exponent length must equal state count");
    m.validate();
    return m;
}

}  // namespace sindykit
