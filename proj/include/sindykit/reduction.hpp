#pragma once

#include <optional>
#include <string>
#include <variant>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "sindykit/dataset.hpp"
#include "sindykit/errors.hpp"

namespace sindykit {

/// Truncated orthonormal basis Psi_r (N x r) with its singular values.
struct ReducedBasis {
    Eigen::MatrixXd modes;
    Eigen::VectorXd singular_values;
    bool mean_removed = false;
    std::optional<Eigen::VectorXd> mean;

    Index dimension() const { return modes.rows(); }
    Index rank() const { return modes.cols(); }
};

struct FixedRank {
    Index r = 1;
};

struct EnergyFraction {
    double e = 0.99;
};

using RankPolicy = std::variant<FixedRank, EnergyFraction>;

/// SVD of the snapshot matrix (rows are snapshots, m x N). Each mode is
/// oriented so that its largest-magnitude entry is positive.
inline ReducedBasis compute_basis(const Eigen::MatrixXd& snapshots, const RankPolicy& policy,
                                  bool remove_mean = false) {
    const Index m = snapshots.rows(), N = snapshots.cols();
    detail::require(m >= 2 && N >= 1, "compute_basis needs at least 2 snapshots of dimension >= 1");
    if (!snapshots.allFinite()) throw DataError("compute_basis: snapshots contain non-finite values");
    if (const auto* ef = std::get_if<EnergyFraction>(&policy))
        if (!(ef->e > 0.0 && ef->e <= 1.0)) throw ConfigError("energy fraction must lie in (0, 1]");

    ReducedBasis basis;
    basis.mean_removed = remove_mean;
    Eigen::MatrixXd work = snapshots;
    if (remove_mean) {
        basis.mean = snapshots.colwise().mean().transpose();
        work.rowwise() -= basis.mean->transpose();
    }
    // Right singular vectors of X are the left singular vectors of X^T.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(work, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const Index available = s.size();

    Index r = 0;
    if (const auto* fr = std::get_if<FixedRank>(&policy)) {
        if (fr->r < 1 || fr->r > available)
            throw ConfigError("fixed rank must lie in [1, " + std::to_string(available) + "]");
        r = fr->r;
    } else {
        const double e = std::get<EnergyFraction>(policy).e;
        const double total = s.squaredNorm();
        if (total == 0.0) throw DataError("compute_basis: snapshots are identically zero");
        double acc = 0.0;
        r = available;
        for (Index i = 0; i < available; ++i) {
            acc += s[i] * s[i];
            if (acc >= e * total) {
                r = i + 1;
                break;
            }
        }
    }

    basis.modes = svd.matrixV().leftCols(r);
    basis.singular_values = s.head(r);
    for (Index j = 0; j < r; ++j) {
        Index imax = 0;
        basis.modes.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis.modes(imax, j) < 0.0) basis.modes.col(j) *= -1.0;
    }
    const double ortho =
        (basis.modes.transpose() * basis.modes - Eigen::MatrixXd::Identity(r, r)).lpNorm<Eigen::Infinity>();
    if (!(ortho <= 1e-10)) throw NumericalError("compute_basis: modes lost orthonormality");
    return basis;
}

inline Eigen::VectorXd project(const ReducedBasis& basis, const Eigen::VectorXd& x) {
    detail::require(x.size() == basis.dimension(), "project: dimension mismatch");
    if (basis.mean) return basis.modes.transpose() * (x - *basis.mean);
    return basis.modes.transpose() * x;
}

inline Eigen::VectorXd lift(const ReducedBasis& basis, const Eigen::VectorXd& a) {
    detail::require(a.size() == basis.rank(), "lift: dimension mismatch");
    Eigen::VectorXd x = basis.modes * a;
    if (basis.mean) x += *basis.mean;
    return x;
}

/// Projects states (affinely) and derivatives (linearly) onto the basis.
inline TimeSeriesDataset reduce_dataset(const TimeSeriesDataset& ds, const ReducedBasis& basis,
                                        std::vector<std::string> names = {}) {
    detail::require(ds.n_states() == basis.dimension(), "reduce_dataset: dimension mismatch");
    TimeSeriesDataset out;
    out.times = ds.times;
    out.segments = ds.segments;
    out.states = ds.states * basis.modes;
    if (basis.mean) out.states.rowwise() -= (basis.modes.transpose() * *basis.mean).transpose();
    if (ds.derivatives) out.derivatives = Eigen::MatrixXd(*ds.derivatives * basis.modes);
    out.state_names = names.empty() ? default_state_names(static_cast<std::size_t>(basis.rank())) : std::move(names);
    out.meta = {{"reduced_from", ds.meta}, {"rank", basis.rank()}};
    out.validate();
    return out;
}

}  // namespace sindykit
