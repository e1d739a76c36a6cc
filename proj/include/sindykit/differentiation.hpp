#pragma once

#include <cmath>
#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "sindykit/dataset.hpp"
#include "sindykit/errors.hpp"

namespace sindykit {

// ---- finite differences ---------------------------------------------------

/// Second-order central differences on a (possibly non-uniform) grid.
/// Interior rows use the three-point Lagrange stencil. The end rows use
/// one-sided four-point stencils (three-point when only three samples
/// exist) so the edges are no less accurate than the interior. Exact for
/// polynomials up to degree 2.
inline Eigen::MatrixXd central_difference(const Eigen::VectorXd& t, const Eigen::MatrixXd& x) {
    const Eigen::Index m = t.size();
    if (m < 3) throw DataError("central_difference needs at least 3 samples, got " + std::to_string(m));
    detail::require(x.rows() == m, "central_difference: times and states differ in length");
    for (Eigen::Index i = 1; i < m; ++i)
        if (!(t[i] > t[i - 1])) throw DataError("central_difference: times must be strictly increasing");

    // Weights of the derivative at `at` of the interpolant through rows
    // i0 .. i0 + k - 1.
    auto stencil = [&](Eigen::Index i0, Eigen::Index k, double at) {
        std::array<double, 4> w{};
        for (Eigen::Index j = 0; j < k; ++j) {
            double sum = 0.0;
            for (Eigen::Index l = 0; l < k; ++l) {
                if (l == j) continue;
                double prod = 1.0 / (t[i0 + j] - t[i0 + l]);
                for (Eigen::Index q = 0; q < k; ++q)
                    if (q != j && q != l) prod *= (at - t[i0 + q]) / (t[i0 + j] - t[i0 + q]);
                sum += prod;
            }
            w[static_cast<std::size_t>(j)] = sum;
        }
        return w;
    };
    Eigen::MatrixXd d(m, x.cols());
    const Eigen::Index edge = m >= 4 ? 4 : 3;
    for (Eigen::Index i = 0; i < m; ++i) {
        Eigen::Index i0 = i - 1, k = 3;
        if (i == 0 || i == m - 1) {
            k = edge;
            i0 = i == 0 ? 0 : m - edge;
        }
        const auto w = stencil(i0, k, t[i]);
        d.row(i).setZero();
        for (Eigen::Index j = 0; j < k; ++j) d.row(i) += w[static_cast<std::size_t>(j)] * x.row(i0 + j);
    }
    return d;
}

/// Fills `derivatives` segment by segment with central differences.
inline TimeSeriesDataset with_central_difference(TimeSeriesDataset ds) {
    ds.validate();
    Eigen::MatrixXd d(ds.rows(), ds.n_states());
    for (std::size_t s = 0; s < ds.segment_count(); ++s) {
        auto [b, e] = ds.segment_range(s);
        d.middleRows(b, e - b) = central_difference(ds.times.segment(b, e - b), ds.states.middleRows(b, e - b));
    }
    ds.derivatives = std::move(d);
    ds.meta["differentiation"] = "Central";
    return ds;
}

// ---- total-variation regularized derivative -------------------------------

struct TvDiffConfig {
    double alpha = 0.01;
    int iterations = 100;
    double dt = 1.0;
    double epsilon = 1e-8;

    void validate() const {
        detail::require(alpha > 0.0, "TV alpha must be > 0");
        detail::require(epsilon > 0.0, "TV epsilon must be > 0");
        detail::require(dt > 0.0, "TV dt must be > 0");
        detail::require(iterations >= 1, "TV needs at least one iteration");
    }
};

struct TvDerivativeTrace {
    Eigen::VectorXd derivative;
    /// Objective at the initial guess followed by its value after each
    /// accepted outer iteration.
    std::vector<double> objective;
};

namespace detail {

// A: trapezoidal running integral, (Au)_0 = 0,
// (Au)_i = dt * (u_0/2 + u_1 + ... + u_{i-1} + u_i/2).
inline Eigen::VectorXd tv_integrate(const Eigen::VectorXd& u, double dt) {
    Eigen::VectorXd out(u.size());
    out[0] = 0.0;
    for (Eigen::Index i = 1; i < u.size(); ++i) out[i] = out[i - 1] + 0.5 * dt * (u[i - 1] + u[i]);
    return out;
}

// A^T applied to v.
inline Eigen::VectorXd tv_integrate_adjoint(const Eigen::VectorXd& v, double dt) {
    const Eigen::Index m = v.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    // Column j of A has dt/2 at row j (j >= 1), dt at rows > j, and for
    // j = 0 dt/2 at every row i >= 1.
    double tail = 0.0;  // sum_{i > j} v_i
    for (Eigen::Index j = m - 1; j >= 0; --j) {
        const double own = j >= 1 ? 0.5 * dt * v[j] : 0.0;
        out[j] = (j == 0 ? 0.5 * dt * tail : dt * tail + own);
        tail += v[j];
    }
    return out;
}

inline double tv_objective(const Eigen::VectorXd& u, const Eigen::VectorXd& data, const TvDiffConfig& cfg) {
    double tv = 0.0;
    for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
        const double d = u[i + 1] - u[i];
        tv += std::sqrt(d * d + cfg.epsilon);
    }
    return cfg.alpha * tv + 0.5 * (tv_integrate(u, cfg.dt) - data).squaredNorm();
}

}  // namespace detail

/// Derivative estimate u minimizing
///     alpha * sum_i sqrt((u_{i+1} - u_i)^2 + epsilon) + 1/2 ||A u - (f - f_0)||^2
/// where A is the trapezoidal running integral on the uniform grid.
///
/// Lagged diffusivity: each outer step freezes the TV weights at the current
/// iterate and minimizes the resulting quadratic majorizer exactly. Writing
/// g = A u, the trapezoid rule reads B g = (dt/2) S u with B and S
/// bidiagonal, so the minimizer solves the sparse saddle-point system
///     [ D^T W D     -(dt/2) S^T ] [u]   [  0   ]
///     [ -(dt/2) S   -B B^T      ] [l] = [ -B f ]
/// in O(m). A step that would raise the objective (rounding near the fixed
/// point) is rejected and the iteration stops there.
inline TvDerivativeTrace tv_derivative_trace(const Eigen::VectorXd& samples, const TvDiffConfig& cfg) {
    cfg.validate();
    const Eigen::Index m = samples.size();
    if (m < 5) throw DataError("tv_derivative needs at least 5 samples, got " + std::to_string(m));
    if (!samples.allFinite()) throw DataError("tv_derivative: samples contain non-finite values");
    const Eigen::VectorXd data = samples.array() - samples[0];
    const Eigen::Index n = m - 1;  // constraint rows, one per interval
    const double h = 0.5 * cfg.dt;

    // Unknowns: u_0..u_{m-1} then l_0..l_{n-1}.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + n);
    for (Eigen::Index k = 0; k < n; ++k) rhs[m + k] = -(data[k + 1] - (k > 0 ? data[k] : 0.0));

    std::vector<Eigen::Triplet<double>> fixed;
    fixed.reserve(static_cast<std::size_t>(7 * n));
    for (Eigen::Index k = 0; k < n; ++k) {
        // -(dt/2) S and its transpose: row k of S has ones at u_k, u_{k+1}.
        for (Eigen::Index j : {k, k + 1}) {
            fixed.emplace_back(m + k, j, -h);
            fixed.emplace_back(j, m + k, -h);
        }
        fixed.emplace_back(m + k, m + k, -(k > 0 ? 2.0 : 1.0));
        if (k > 0) {
            fixed.emplace_back(m + k, m + k - 1, 1.0);
            fixed.emplace_back(m + k - 1, m + k, 1.0);
        }
    }

    // Initial guess: forward/backward/central differences of the samples.
    Eigen::VectorXd u(m);
    u[0] = (samples[1] - samples[0]) / cfg.dt;
    u[m - 1] = (samples[m - 1] - samples[m - 2]) / cfg.dt;
    for (Eigen::Index i = 1; i + 1 < m; ++i) u[i] = (samples[i + 1] - samples[i - 1]) / (2.0 * cfg.dt);

    TvDerivativeTrace trace;
    double current = detail::tv_objective(u, data, cfg);
    trace.objective.push_back(current);
    Eigen::SparseMatrix<double> kkt(m + n, m + n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    bool analyzed = false;

    for (int it = 0; it < cfg.iterations; ++it) {
        std::vector<Eigen::Triplet<double>> trip = fixed;
        for (Eigen::Index i = 0; i + 1 < m; ++i) {
            const double d = u[i + 1] - u[i];
            const double w = cfg.alpha / std::sqrt(d * d + cfg.epsilon);
            trip.emplace_back(i, i, w);
            trip.emplace_back(i + 1, i + 1, w);
            trip.emplace_back(i, i + 1, -w);
            trip.emplace_back(i + 1, i, -w);
        }
        kkt.setFromTriplets(trip.begin(), trip.end());
        if (!analyzed) {
            solver.analyzePattern(kkt);
            analyzed = true;
        }
        solver.factorize(kkt);
        if (solver.info() != Eigen::Success) throw NumericalError("tv_derivative: factorization failed");
        const Eigen::VectorXd sol = solver.solve(rhs);
        const Eigen::VectorXd next = sol.head(m);
        const double value = next.allFinite() ? detail::tv_objective(next, data, cfg) : INFINITY;
        if (!(value <= current)) break;
        u = next;
        current = value;
        trace.objective.push_back(current);
    }
    trace.derivative = std::move(u);
    return trace;
}

inline Eigen::VectorXd tv_derivative(const Eigen::VectorXd& samples, const TvDiffConfig& cfg) {
    return tv_derivative_trace(samples, cfg).derivative;
}

/// Fills `derivatives` by TV differentiation of every column of every
/// segment. Each segment must be uniformly sampled with step cfg.dt.
/// Columns listed in `skip` get zero derivatives (constant parameters).
inline TimeSeriesDataset with_tv_derivative(TimeSeriesDataset ds, const TvDiffConfig& cfg,
                                            const std::vector<std::string>& skip = {}) {
    ds.validate();
    Eigen::MatrixXd d(ds.rows(), ds.n_states());
    for (std::size_t s = 0; s < ds.segment_count(); ++s) {
        auto [b, e] = ds.segment_range(s);
        for (Eigen::Index i = b + 1; i < e; ++i)
            if (std::abs((ds.times[i] - ds.times[i - 1]) - cfg.dt) > 1e-9 * std::max(1.0, cfg.dt))
                throw DataError("tv_derivative requires uniform sampling with step dt; resample first (row " +
                                std::to_string(i) + ")");
        for (Eigen::Index c = 0; c < ds.n_states(); ++c) {
            const auto& name = ds.state_names[static_cast<std::size_t>(c)];
            if (std::find(skip.begin(), skip.end(), name) != skip.end()) {
                d.block(b, c, e - b, 1).setZero();
                continue;
            }
            d.block(b, c, e - b, 1) = tv_derivative(ds.states.block(b, c, e - b, 1), cfg);
        }
    }
    ds.derivatives = std::move(d);
    ds.meta["differentiation"] = {{"method", "Tv"}, {"alpha", cfg.alpha}, {"iterations", cfg.iterations},
                                  {"epsilon", cfg.epsilon}, {"dt", cfg.dt}};
    return ds;
}

// ---- noise ----------------------------------------------------------------

enum class NoiseTarget { Derivatives, States, Both };

inline const char* to_string(NoiseTarget t) {
    switch (t) {
        case NoiseTarget::Derivatives: return "Derivatives";
        case NoiseTarget::States: return "States";
        case NoiseTarget::Both: return "Both";
    }
    return "?";
}

inline NoiseTarget noise_target_from_string(const std::string& s) {
    if (s == "Derivatives") return NoiseTarget::Derivatives;
    if (s == "States") return NoiseTarget::States;
    if (s == "Both") return NoiseTarget::Both;
    throw ConfigError("unknown noise target '" + s + "'");
}

/// eta * Z with Z standard normal; eta is a standard-deviation multiplier.
struct NoiseSpec {
    double eta = 0.0;
    NoiseTarget target = NoiseTarget::Derivatives;
    std::uint64_t seed = 0;
};

/// eta * Z drawn row-major from a generator seeded with `seed`, after
/// discarding `skip` draws. Scaling is exact: the matrix for 2 eta is
/// exactly twice the matrix for eta.
inline Eigen::MatrixXd noise_matrix(Eigen::Index rows, Eigen::Index cols, double eta, std::uint64_t seed,
                                    std::uint64_t skip = 0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::uint64_t i = 0; i < skip; ++i) (void)normal(gen);
    Eigen::MatrixXd z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) z(i, j) = eta * normal(gen);
    return z;
}

/// Adds seeded Gaussian noise. With target Both the state noise uses the
/// first m*n draws and the derivative noise the next m*n.
inline TimeSeriesDataset add_noise(TimeSeriesDataset ds, const NoiseSpec& spec) {
    detail::require(spec.eta >= 0.0, "noise eta must be >= 0");
    const bool to_states = spec.target != NoiseTarget::Derivatives;
    const bool to_derivs = spec.target != NoiseTarget::States;
    if (to_derivs && !ds.derivatives) throw DataError("add_noise: dataset has no derivatives to perturb");
    ds.meta["noise"] = {{"eta", spec.eta}, {"target", to_string(spec.target)}, {"seed", spec.seed}};
    if (spec.eta == 0.0) return ds;
    const auto count = static_cast<std::uint64_t>(ds.rows() * ds.n_states());
    if (to_states) ds.states += noise_matrix(ds.rows(), ds.n_states(), spec.eta, spec.seed);
    if (to_derivs)
        *ds.derivatives += noise_matrix(ds.rows(), ds.n_states(), spec.eta, spec.seed, to_states ? count : 0);
    return ds;
}

}  // namespace sindykit
