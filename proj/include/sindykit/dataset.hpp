#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "sindykit/errors.hpp"
#include "sindykit/terms.hpp"

namespace sindykit {

using Index = Eigen::Index;

/// Sampled trajectory data: the state matrix X, optionally the derivative
/// matrix, and provenance.
///
/// A dataset may hold several independently sampled trajectories stacked
/// row-wise; `segments` lists the first row of each. Times are strictly
/// increasing within a segment and may restart at a segment boundary.
struct TimeSeriesDataset {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;
    std::optional<Eigen::MatrixXd> derivatives;
    std::vector<std::string> state_names;
    std::vector<Index> segments{0};
    nlohmann::json meta = nlohmann::json::object();

    Index rows() const { return states.rows(); }
    Index n_states() const { return states.cols(); }
    std::size_t segment_count() const { return segments.size(); }

    /// Half-open row range [begin, end) of segment k.
    std::pair<Index, Index> segment_range(std::size_t k) const {
        const Index begin = segments.at(k);
        const Index end = k + 1 < segments.size() ? segments[k + 1] : rows();
        return {begin, end};
    }

    void validate() const {
        detail::require(times.size() == states.rows(), "times length must equal state row count");
        if (derivatives) {
            detail::require(derivatives->rows() == states.rows() && derivatives->cols() == states.cols(),
                            "derivative matrix shape must match states");
        }
        detail::require(static_cast<Index>(state_names.size()) == states.cols(),
                        "state_names length must equal state column count");
        detail::require(!segments.empty() && segments.front() == 0, "segments must start at row 0");
        for (std::size_t k = 1; k < segments.size(); ++k)
            detail::require(segments[k] > segments[k - 1] && segments[k] < rows(),
                            "segment offsets must be increasing and inside the data");
        for (std::size_t k = 0; k < segments.size(); ++k) {
            auto [b, e] = segment_range(k);
            for (Index i = b + 1; i < e; ++i)
                if (!(times[i] > times[i - 1]))
                    throw DataError("times not strictly increasing at row " + std::to_string(i));
        }
    }
};

inline TimeSeriesDataset make_dataset(Eigen::VectorXd times, Eigen::MatrixXd states,
                                      std::optional<Eigen::MatrixXd> derivatives = std::nullopt,
                                      std::vector<std::string> names = {}) {
    TimeSeriesDataset ds;
    ds.times = std::move(times);
    ds.states = std::move(states);
    ds.derivatives = std::move(derivatives);
    ds.state_names = names.empty() ? default_state_names(static_cast<std::size_t>(ds.states.cols()))
                                   : std::move(names);
    ds.validate();
    return ds;
}

/// Stacks datasets with identical state names; each input keeps its own
/// segment boundaries. Derivatives survive only if every part has them.
inline TimeSeriesDataset concatenate(const std::vector<TimeSeriesDataset>& parts) {
    detail::require(!parts.empty(), "concatenate needs at least one dataset");
    const auto& names = parts.front().state_names;
    Index total = 0;
    bool all_deriv = true;
    for (const auto& p : parts) {
        detail::require(p.state_names == names, "concatenate: state names differ");
        total += p.rows();
        all_deriv = all_deriv && p.derivatives.has_value();
    }
    const Index n = parts.front().n_states();
    TimeSeriesDataset out;
    out.state_names = names;
    out.times.resize(total);
    out.states.resize(total, n);
    if (all_deriv) out.derivatives = Eigen::MatrixXd(total, n);
    out.segments.clear();
    out.meta = nlohmann::json::object();
    out.meta["parts"] = nlohmann::json::array();
    Index row = 0;
    for (const auto& p : parts) {
        out.times.segment(row, p.rows()) = p.times;
        out.states.middleRows(row, p.rows()) = p.states;
        if (all_deriv) out.derivatives->middleRows(row, p.rows()) = *p.derivatives;
        for (Index s : p.segments) out.segments.push_back(row + s);
        out.meta["parts"].push_back(p.meta);
        row += p.rows();
    }
    out.validate();
    return out;
}

/// Copies the given half-open row ranges into a new dataset. Every range
/// starts a new segment (and any original segment boundary inside a range
/// is kept), so no two rows become adjacent unless they were adjacent and
/// in the same segment before.
inline TimeSeriesDataset select_rows(const TimeSeriesDataset& ds,
                                     const std::vector<std::pair<Index, Index>>& ranges) {
    Index total = 0;
    for (auto [b, e] : ranges) {
        detail::require(0 <= b && b < e && e <= ds.rows(), "select_rows: bad range");
        total += e - b;
    }
    TimeSeriesDataset out;
    out.state_names = ds.state_names;
    out.meta = ds.meta;
    out.times.resize(total);
    out.states.resize(total, ds.n_states());
    if (ds.derivatives) out.derivatives = Eigen::MatrixXd(total, ds.n_states());
    out.segments.clear();
    Index row = 0;
    for (auto [b, e] : ranges) {
        const Index len = e - b;
        out.times.segment(row, len) = ds.times.segment(b, len);
        out.states.middleRows(row, len) = ds.states.middleRows(b, len);
        if (ds.derivatives) out.derivatives->middleRows(row, len) = ds.derivatives->middleRows(b, len);
        out.segments.push_back(row);
        for (Index s : ds.segments)
            if (s > b && s < e) out.segments.push_back(row + (s - b));
        row += len;
    }
    std::sort(out.segments.begin(), out.segments.end());
    out.validate();
    return out;
}

/// Drops `k` rows at both ends of every segment (edge samples are where
/// regularized derivative estimates are least reliable). Segments shorter
/// than 2k + 1 rows are dropped entirely.
inline TimeSeriesDataset trim_segments(const TimeSeriesDataset& ds, Index k) {
    detail::require(k >= 0, "trim_segments: k must be >= 0");
    if (k == 0) return ds;
    std::vector<std::pair<Index, Index>> ranges;
    for (std::size_t s = 0; s < ds.segment_count(); ++s) {
        auto [b, e] = ds.segment_range(s);
        if (e - b > 2 * k) ranges.emplace_back(b + k, e - k);
    }
    if (ranges.empty()) throw DataError("trimming removed every sample");
    auto out = select_rows(ds, ranges);
    out.meta["trimmed"] = k;
    return out;
}

}  // namespace sindykit
