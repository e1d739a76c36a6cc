#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sindykit/dataset.hpp"
#include "sindykit/errors.hpp"
#include "sindykit/library.hpp"
#include "sindykit/model.hpp"
#include "sindykit/parallel.hpp"
#include "sindykit/regression.hpp"

namespace sindykit {

struct ParetoPoint {
    double lambda = 0.0;
    Index nnz_total = 0;
    double train_residual = 0.0;
    double validation_residual = 0.0;
};

enum class SplitPolicy { Tail, SeededBlocks };

inline const char* to_string(SplitPolicy p) { return p == SplitPolicy::Tail ? "Tail" : "SeededBlocks"; }

inline SplitPolicy split_policy_from_string(const std::string& s) {
    if (s == "Tail") return SplitPolicy::Tail;
    if (s == "SeededBlocks") return SplitPolicy::SeededBlocks;
    throw ConfigError("unknown split policy '" + s + "'");
}

struct SplitConfig {
    /// Share of rows held out for validation.
    double fraction = 0.2;
    SplitPolicy policy = SplitPolicy::Tail;
    std::uint64_t seed = 0;
    /// Block count for SeededBlocks.
    Index blocks = 10;
};

struct Split {
    TimeSeriesDataset train;
    TimeSeriesDataset validation;
};

/// Disjoint, exhaustive row split. Tail holds out the last rows; SeededBlocks
/// cuts the rows into equal contiguous blocks and holds out a seeded random
/// choice of them.
inline Split split(const TimeSeriesDataset& ds, const SplitConfig& cfg) {
    if (!(cfg.fraction > 0.0 && cfg.fraction < 1.0)) throw ConfigError("split fraction must lie in (0, 1)");
    const Index m = ds.rows();
    if (cfg.policy == SplitPolicy::Tail) {
        const auto n_val = static_cast<Index>(std::llround(cfg.fraction * static_cast<double>(m)));
        if (n_val < 1 || m - n_val < 2) throw DataError("too few samples to split (" + std::to_string(m) + ")");
        return {select_rows(ds, {{0, m - n_val}}), select_rows(ds, {{m - n_val, m}})};
    }
    if (cfg.blocks < 2) throw ConfigError("block split needs at least 2 blocks");
    if (m < 2 * cfg.blocks) throw DataError("too few samples to split (" + std::to_string(m) + ")");
    const auto n_val = std::clamp<Index>(
        static_cast<Index>(std::llround(cfg.fraction * static_cast<double>(cfg.blocks))), 1, cfg.blocks - 1);
    std::vector<Index> order(static_cast<std::size_t>(cfg.blocks));
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 gen(cfg.seed);
    // Fisher-Yates with an explicit draw so the result does not depend on
    // the standard library's shuffle.
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[gen() % (i + 1)]);
    std::vector<bool> held(order.size(), false);
    for (Index k = 0; k < n_val; ++k) held[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
    std::vector<std::pair<Index, Index>> tr, va;
    for (Index b = 0; b < cfg.blocks; ++b) {
        const Index lo = b * m / cfg.blocks, hi = (b + 1) * m / cfg.blocks;
        auto& dst = held[static_cast<std::size_t>(b)] ? va : tr;
        if (!dst.empty() && dst.back().second == lo)
            dst.back().second = hi;
        else
            dst.emplace_back(lo, hi);
    }
    return {select_rows(ds, tr), select_rows(ds, va)};
}

/// ||target - Theta Xi||_F / ||target||_F (the absolute norm if the target
/// is zero).
inline double relative_residual(const RegressionProblem& prob, const Eigen::MatrixXd& xi) {
    const double num = (prob.target - prob.theta.values * xi).norm();
    const double den = prob.target.norm();
    return den > 0.0 ? num / den : num;
}

struct SweepResult {
    std::vector<ParetoPoint> points;
    std::vector<SparseModel> models;
};

inline void validate_lambda_grid(const std::vector<double>& lambdas) {
    detail::require(!lambdas.empty(), "lambda grid is empty");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0)) throw ConfigError("lambda values must be >= 0");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw ConfigError("lambda grid must be strictly ascending");
    }
}

/// One STLSQ fit per lambda on the training split; residuals on both splits.
inline SweepResult sweep(const TimeSeriesDataset& train, const TimeSeriesDataset& validation, const LibrarySpec& spec,
                         const std::vector<double>& lambdas, StlsqConfig base = {},
                         TimeMode mode = TimeMode::ContinuousTime) {
    validate_lambda_grid(lambdas);
    const auto tr = make_problem(train, spec, mode);
    const auto va = make_problem(validation, spec, mode);
    require_overdetermined(tr);
    SweepResult out;
    out.points.resize(lambdas.size());
    out.models.resize(lambdas.size());
    parallel_for(lambdas.size(), [&](std::size_t i) {
        StlsqConfig cfg = base;
        cfg.lambda = lambdas[i];
        auto res = stlsq(tr.theta, tr.target, cfg, train.state_names, mode);
        ParetoPoint& p = out.points[i];
        p.lambda = lambdas[i];
        p.nnz_total = res.model.nnz();
        p.train_residual = relative_residual(tr, res.model.coefficients);
        p.validation_residual = relative_residual(va, res.model.coefficients);
        out.models[i] = std::move(res.model);
    });
    return out;
}

inline SweepResult sweep(const TimeSeriesDataset& ds, const LibrarySpec& spec, const std::vector<double>& lambdas,
                         const SplitConfig& split_cfg = {}, StlsqConfig base = {},
                         TimeMode mode = TimeMode::ContinuousTime) {
    const auto parts = split(ds, split_cfg);
    return sweep(parts.train, parts.validation, spec, lambdas, base, mode);
}

/// `count` values log-spaced from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0 && hi > lo) || count < 2) throw ConfigError("log grid needs 0 < lo < hi and count >= 2");
    std::vector<double> g(static_cast<std::size_t>(count));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

struct ElbowPick {
    double lambda = 0.0;
    std::size_t index = 0;
    /// True when no knee exists and the near-minimum-residual rule chose.
    bool fallback = false;
    double curvature = 0.0;
};

namespace detail {

/// Signed curvature of the circle through three points; positive for a
/// counter-clockwise turn.
inline double menger_curvature(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double cross = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
    const double a = std::hypot(x1 - x0, y1 - y0), b = std::hypot(x2 - x1, y2 - y1), c = std::hypot(x2 - x0, y2 - y0);
    const double den = a * b * c;
    return den > 0.0 ? 2.0 * cross / den : 0.0;
}

}  // namespace detail

/// Knee of the (log nnz, log validation residual) curve. Points with equal
/// complexity are merged (keeping the largest lambda), zero models are
/// excluded, and the knee is the interior vertex with the largest convex
/// curvature. Ties go to the larger lambda.
inline ElbowPick pick_elbow(const std::vector<ParetoPoint>& points) {
    detail::require(points.size() >= 3, "pick_elbow needs at least 3 points");
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[a].lambda < points[b].lambda; });

    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        const auto& p = points[idx];
        if (p.nnz_total == 0) continue;
        if (!kept.empty() && points[kept.back()].nnz_total == p.nnz_total)
            kept.back() = idx;
        else
            kept.push_back(idx);
    }

    ElbowPick pick;
    bool found = false;
    if (kept.size() >= 3) {
        std::vector<double> lx, ly;
        for (std::size_t idx : kept) {
            lx.push_back(std::log(static_cast<double>(points[idx].nnz_total)));
            ly.push_back(std::log(std::max(points[idx].validation_residual, 1e-300)));
        }
        // Walk in ascending complexity so a convex knee turns counter-clockwise.
        for (std::size_t j = kept.size() - 2; j >= 1; --j) {
            const double k = detail::menger_curvature(lx[j + 1], ly[j + 1], lx[j], ly[j], lx[j - 1], ly[j - 1]);
            if (k > 1e-12 && (!found || k > pick.curvature)) {
                pick = {points[kept[j]].lambda, kept[j], false, k};
                found = true;
            }
            if (j == 1) break;
        }
    }
    if (found) return pick;

    double best = points[0].validation_residual;
    for (const auto& p : points) best = std::min(best, p.validation_residual);
    pick.fallback = true;
    bool any = false;
    for (std::size_t idx : order)
        if (points[idx].validation_residual <= 1.05 * best) {
            pick.lambda = points[idx].lambda;
            pick.index = idx;
            any = true;
        }
    if (!any) throw NumericalError("pick_elbow: residuals are not comparable");
    return pick;
}

}  // namespace sindykit
