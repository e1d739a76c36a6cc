#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sindykit/dataset.hpp"
#include "sindykit/errors.hpp"
#include "sindykit/library.hpp"
#include "sindykit/model.hpp"
#include "sindykit/parallel.hpp"

namespace sindykit {

// ---- least squares --------------------------------------------------------

struct LeastSquaresSolution {
    Eigen::MatrixXd x;        // p x k, one column per right-hand side
    Eigen::Index rank = 0;
    double condition = 0.0;   // sigma_max / smallest retained sigma
};

/// Minimum-norm least-squares solution of A X = B.
///
/// Tall problems are reduced with a Householder QR first and the SVD is
/// taken of the p x p triangular factor, which has the same singular values
/// as A. Singular values at or below max(m, p) * eps * sigma_max are
/// treated as zero.
inline LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() == 0 || A.cols() == 0) throw ContractViolation("least squares on an empty matrix");
    detail::require(B.rows() == A.rows(), "least squares: right-hand side row count mismatch");
    const Eigen::Index m = A.rows(), p = A.cols();
    Eigen::MatrixXd core;  // the matrix whose SVD we take
    Eigen::MatrixXd rhs;
    if (m >= p) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        Eigen::MatrixXd qtb = qr.householderQ().adjoint() * B;
        core = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        rhs = qtb.topRows(p);
    } else {
        core = A;
        rhs = B;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smax = s.size() ? s[0] : 0.0;
    const double cutoff = static_cast<double>(std::max(m, p)) * std::numeric_limits<double>::epsilon() * smax;
    LeastSquaresSolution out;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    double smin = smax;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > cutoff) {
            inv[i] = 1.0 / s[i];
            ++out.rank;
            smin = s[i];
        }
    }
    out.x = svd.matrixV() * (inv.asDiagonal() * (svd.matrixU().adjoint() * rhs));
    out.condition = out.rank > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    return out;
}

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    return solve_least_squares(A, b).x.col(0);
}

// ---- STLSQ ---------------------------------------------------------------

enum class Convergence { FixedIterations, SupportStable };

inline const char* to_string(Convergence c) {
    return c == Convergence::FixedIterations ? "FixedIterations" : "SupportStable";
}

inline Convergence convergence_from_string(const std::string& s) {
    if (s == "FixedIterations") return Convergence::FixedIterations;
    if (s == "SupportStable") return Convergence::SupportStable;
    throw ConfigError("unknown convergence policy '" + s + "'");
}

struct StlsqConfig {
    double lambda = 0.05;
    int max_iterations = 10;
    Convergence convergence = Convergence::SupportStable;

    void validate() const {
        detail::require(lambda >= 0.0 && std::isfinite(lambda), "STLSQ threshold must be a finite value >= 0");
        detail::require(max_iterations >= 1, "STLSQ needs max_iterations >= 1");
    }
};

/// Per-equation diagnostics of a fit.
struct FitReport {
    std::vector<int> iterations_used;
    std::vector<double> residual_norm;
    std::vector<Eigen::Index> nnz;
    std::vector<double> condition_estimate;
    std::vector<bool> converged;
    /// The threshold removed every term; the returned column is zero.
    std::vector<bool> empty_support;
    /// The regression target was identically zero.
    std::vector<bool> zero_target;

    void resize(std::size_t n) {
        iterations_used.assign(n, 0);
        residual_norm.assign(n, 0.0);
        nnz.assign(n, 0);
        condition_estimate.assign(n, 0.0);
        converged.assign(n, false);
        empty_support.assign(n, false);
        zero_target.assign(n, false);
    }
};

inline nlohmann::json to_json(const FitReport& r) {
    nlohmann::json cond = nlohmann::json::array();
    for (double c : r.condition_estimate) cond.push_back(std::isfinite(c) ? nlohmann::json(c) : nlohmann::json(nullptr));
    return {{"iterations_used", r.iterations_used}, {"residual_norm", r.residual_norm},
            {"nnz", r.nnz},                         {"condition_estimate", cond},
            {"converged", r.converged},             {"empty_support", r.empty_support},
            {"zero_target", r.zero_target}};
}

struct StlsqColumn {
    Eigen::VectorXd xi;
    int iterations = 0;
    bool converged = false;
    bool empty_support = false;
    double condition = 0.0;
};

namespace detail {

inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& cols) {
    Eigen::MatrixXd out(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = A.col(cols[j]);
    return out;
}

}  // namespace detail

/// Sequentially thresholded least squares for one equation, starting from
/// the full least-squares solution `initial`.
///
/// Each round zeroes every active coefficient with |xi| < lambda and
/// re-solves on the survivors. SupportStable stops as soon as a round
/// removes nothing; FixedIterations always runs max_iterations rounds.
/// If the cap is hit while the support still changes, a final zeroing pass
/// (without re-solve) keeps every returned nonzero at or above lambda.
inline StlsqColumn stlsq_column(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                                const Eigen::VectorXd& initial, double initial_condition,
                                const StlsqConfig& cfg) {
    const Eigen::Index p = theta.cols();
    StlsqColumn out;
    out.xi = initial;
    out.condition = initial_condition;
    std::vector<bool> active(static_cast<std::size_t>(p), true);
    for (int round = 0; round < cfg.max_iterations; ++round) {
        bool removed = false;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (active[static_cast<std::size_t>(j)] && std::abs(out.xi[j]) < cfg.lambda) {
                active[static_cast<std::size_t>(j)] = false;
                out.xi[j] = 0.0;
                removed = true;
            }
        }
        if (!removed && cfg.convergence == Convergence::SupportStable) break;
        std::vector<Eigen::Index> cols;
        for (Eigen::Index j = 0; j < p; ++j)
            if (active[static_cast<std::size_t>(j)]) cols.push_back(j);
        if (cols.empty()) {
            out.empty_support = true;
            break;
        }
        const auto sol = solve_least_squares(detail::select_columns(theta, cols), target);
        for (std::size_t j = 0; j < cols.size(); ++j) out.xi[cols[j]] = sol.x(static_cast<Eigen::Index>(j), 0);
        out.condition = sol.condition;
        ++out.iterations;
    }
    // Is the current vector a fixed point (nothing left below lambda)?
    bool clean = true;
    for (Eigen::Index j = 0; j < p; ++j)
        if (out.xi[j] != 0.0 && std::abs(out.xi[j]) < cfg.lambda) clean = false;
    out.converged = clean;
    if (!clean) {
        for (Eigen::Index j = 0; j < p; ++j)
            if (std::abs(out.xi[j]) < cfg.lambda) out.xi[j] = 0.0;
        if ((out.xi.array() == 0.0).all()) out.empty_support = true;
    }
    if (out.empty_support) out.condition = 0.0;
    return out;
}

struct StlsqResult {
    SparseModel model;
    FitReport report;
};

/// Column-wise sparse regression dX = Theta Xi.
inline StlsqResult stlsq(const LibraryMatrix& theta, const Eigen::MatrixXd& dX, const StlsqConfig& cfg,
                         std::vector<std::string> state_names = {},
                         TimeMode mode = TimeMode::ContinuousTime) {
    cfg.validate();
    detail::require(dX.rows() == theta.rows(), "stlsq: target rows must equal library rows");
    detail::require(static_cast<Eigen::Index>(theta.terms.size()) == theta.cols(), "stlsq: term list mismatch");
    const auto n = static_cast<std::size_t>(dX.cols());
    if (state_names.empty()) state_names = default_state_names(n);
    detail::require(state_names.size() == n, "stlsq: state name count mismatch");

    const auto initial = solve_least_squares(theta.values, dX);
    StlsqResult res;
    res.model = zero_model(theta.terms, std::move(state_names), mode);
    res.report.resize(n);
    std::vector<StlsqColumn> cols(n);
    parallel_for(n, [&](std::size_t k) {
        const auto kk = static_cast<Eigen::Index>(k);
        cols[k] = stlsq_column(theta.values, dX.col(kk), initial.x.col(kk), initial.condition, cfg);
    });
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        res.model.coefficients.col(kk) = cols[k].xi;
        res.report.iterations_used[k] = cols[k].iterations;
        res.report.converged[k] = cols[k].converged;
        res.report.empty_support[k] = cols[k].empty_support;
        res.report.zero_target[k] = (dX.col(kk).array() == 0.0).all();
        res.report.condition_estimate[k] = cols[k].condition;
        res.report.nnz[k] = (cols[k].xi.array() != 0.0).count();
        res.report.residual_norm[k] = (theta.values * cols[k].xi - dX.col(kk)).norm();
    }
    return res;
}

// ---- LASSO ---------------------------------------------------------------

struct LassoConfig {
    double lambda1 = 0.0;
    double tol = 1e-10;
    int max_sweeps = 100000;

    void validate() const {
        detail::require(lambda1 >= 0.0, "LASSO weight must be >= 0");
        detail::require(tol > 0.0, "LASSO tolerance must be > 0");
        detail::require(max_sweeps >= 1, "LASSO needs max_sweeps >= 1");
    }
};

struct LassoResult {
    Eigen::VectorXd coefficients;
    int sweeps = 0;
    bool converged = false;
};

/// Cyclic coordinate descent for  ||Theta_n beta - b||^2 + lambda1 ||beta||_1
/// where Theta_n has unit-norm columns; the returned coefficients are
/// mapped back to the original column scaling. Columns are visited in index
/// order. Stops when the largest change of any beta in a sweep drops below
/// tol; otherwise returns the last iterate with `converged = false`.
inline LassoResult lasso_cd(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target, const LassoConfig& cfg) {
    cfg.validate();
    detail::require(theta.rows() == target.size(), "lasso: row count mismatch");
    detail::require(theta.cols() > 0, "lasso on an empty library");
    const Eigen::Index p = theta.cols();
    Eigen::VectorXd norms = theta.colwise().norm().transpose();
    Eigen::MatrixXd a = theta;
    for (Eigen::Index j = 0; j < p; ++j)
        if (norms[j] > 0.0) a.col(j) /= norms[j];
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = target;
    const double half = 0.5 * cfg.lambda1;
    LassoResult out;
    for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (norms[j] == 0.0) continue;
            const double rho = a.col(j).dot(r) + beta[j];
            const double next = rho > half ? rho - half : (rho < -half ? rho + half : 0.0);
            const double delta = next - beta[j];
            if (delta != 0.0) {
                r.noalias() -= delta * a.col(j);
                beta[j] = next;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        out.sweeps = sweep;
        if (max_change < cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.coefficients = Eigen::VectorXd::Zero(p);
    for (Eigen::Index j = 0; j < p; ++j)
        if (norms[j] > 0.0) out.coefficients[j] = beta[j] / norms[j];
    return out;
}

// ---- dataset-level fit ----------------------------------------------------

/// Regression pair for a dataset: library rows and target rows.
struct RegressionProblem {
    LibraryMatrix theta;
    Eigen::MatrixXd target;
};

/// ContinuousTime regresses derivatives on Theta(X). DiscreteTime regresses
/// X_{k+1} on Theta(X_k), pairing rows only inside a segment.
inline RegressionProblem make_problem(const TimeSeriesDataset& ds, const LibrarySpec& spec, TimeMode mode) {
    ds.validate();
    detail::require(ds.n_states() == spec.n_states, "library state count does not match dataset");
    RegressionProblem prob;
    if (mode == TimeMode::ContinuousTime) {
        if (!ds.derivatives)
            throw DataError(
                "continuous-time fit needs derivatives; estimate them first with central_difference or "
                "tv_derivative");
        prob.theta = build_matrix(spec, ds.states);
        prob.target = *ds.derivatives;
        return prob;
    }
    Eigen::Index pairs = 0;
    for (std::size_t s = 0; s < ds.segment_count(); ++s) {
        auto [b, e] = ds.segment_range(s);
        pairs += std::max<Eigen::Index>(0, e - b - 1);
    }
    if (pairs < 1) throw DataError("discrete-time fit needs at least two consecutive samples");
    Eigen::MatrixXd x1(pairs, ds.n_states()), x2(pairs, ds.n_states());
    Eigen::Index row = 0;
    for (std::size_t s = 0; s < ds.segment_count(); ++s) {
        auto [b, e] = ds.segment_range(s);
        for (Eigen::Index i = b; i + 1 < e; ++i, ++row) {
            x1.row(row) = ds.states.row(i);
            x2.row(row) = ds.states.row(i + 1);
        }
    }
    prob.theta = build_matrix(spec, x1);
    prob.target = std::move(x2);
    return prob;
}

inline void require_overdetermined(const RegressionProblem& prob) {
    if (prob.theta.rows() <= prob.theta.cols())
        throw DataError("fit needs more samples (" + std::to_string(prob.theta.rows()) + ") than library terms (" +
                        std::to_string(prob.theta.cols()) + ")");
}

inline StlsqResult fit(const TimeSeriesDataset& ds, const LibrarySpec& spec, const StlsqConfig& cfg,
                       TimeMode mode = TimeMode::ContinuousTime) {
    const auto prob = make_problem(ds, spec, mode);
    require_overdetermined(prob);
    return stlsq(prob.theta, prob.target, cfg, ds.state_names, mode);
}

inline StlsqResult fit_lasso(const TimeSeriesDataset& ds, const LibrarySpec& spec, const LassoConfig& cfg,
                             TimeMode mode = TimeMode::ContinuousTime) {
    const auto prob = make_problem(ds, spec, mode);
    require_overdetermined(prob);
    const auto n = static_cast<std::size_t>(prob.target.cols());
    StlsqResult res;
    res.model = zero_model(prob.theta.terms, ds.state_names, mode);
    res.report.resize(n);
    std::vector<LassoResult> cols(n);
    parallel_for(n, [&](std::size_t k) {
        cols[k] = lasso_cd(prob.theta.values, prob.target.col(static_cast<Eigen::Index>(k)), cfg);
    });
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        res.model.coefficients.col(kk) = cols[k].coefficients;
        res.report.iterations_used[k] = cols[k].sweeps;
        res.report.converged[k] = cols[k].converged;
        res.report.nnz[k] = (cols[k].coefficients.array() != 0.0).count();
        res.report.empty_support[k] = res.report.nnz[k] == 0;
        res.report.zero_target[k] = (prob.target.col(kk).array() == 0.0).all();
        res.report.residual_norm[k] = (prob.theta.values * cols[k].coefficients - prob.target.col(kk)).norm();
        std::vector<Eigen::Index> act;
        for (Eigen::Index j = 0; j < cols[k].coefficients.size(); ++j)
            if (cols[k].coefficients[j] != 0.0) act.push_back(j);
        if (!act.empty()) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::select_columns(prob.theta.values, act));
            const auto& s = svd.singularValues();
            res.report.condition_estimate[k] = s[s.size() - 1] > 0 ? s[0] / s[s.size() - 1]
                                                                    : std::numeric_limits<double>::infinity();
        }
    }
    return res;
}

}  // namespace sindykit
