#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "sindykit/dataset.hpp"
#include "sindykit/errors.hpp"
#include "sindykit/reduction.hpp"
#include "sindykit/selection.hpp"

namespace sindykit {

/// 17 significant digits; round-trips every finite double.
inline std::string format_number(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && (e[-1] == ' ' || e[-1] == '\r')) --e;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc{} || res.ptr != e) throw DataError("cannot parse number '" + s + "' at " + where);
    return v;
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write to '" + path.string() + "'");
    return out;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = detail::open_for_write(path);
    out << text;
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

/// Header `t,<names>[,d<names>]`, one row per sample.
inline void write_csv(const std::filesystem::path& path, const TimeSeriesDataset& ds) {
    auto out = detail::open_for_write(path);
    out << 't';
    for (const auto& n : ds.state_names) out << ',' << n;
    if (ds.derivatives)
        for (const auto& n : ds.state_names) out << ",d" << n;
    out << '\n';
    for (Index i = 0; i < ds.rows(); ++i) {
        out << format_number(ds.times[i]);
        for (Index j = 0; j < ds.n_states(); ++j) out << ',' << format_number(ds.states(i, j));
        if (ds.derivatives)
            for (Index j = 0; j < ds.n_states(); ++j) out << ',' << format_number((*ds.derivatives)(i, j));
        out << '\n';
    }
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

/// Reads a dataset CSV. Columns named `d<name>` for every state name make up
/// the derivatives. A time stamp that does not increase starts a new segment.
inline TimeSeriesDataset read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
    auto header = detail::split_line(line);
    for (auto& h : header)
        while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    if (header.size() < 2 || header[0] != "t") throw DataError("'" + path.string() + "': header must start with t");
    std::vector<std::string> names(header.begin() + 1, header.end());
    bool has_deriv = false;
    if (names.size() % 2 == 0) {
        const std::size_t n = names.size() / 2;
        has_deriv = true;
        for (std::size_t k = 0; k < n; ++k) has_deriv = has_deriv && names[n + k] == "d" + names[k];
        if (has_deriv) names.resize(n);
    }
    const auto n = static_cast<Index>(names.size());
    std::vector<double> t, x, d;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_line(line);
        if (cells.size() != header.size())
            throw DataError("'" + path.string() + "' line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " fields");
        const std::string where = path.string() + " line " + std::to_string(lineno);
        t.push_back(parse_number(cells[0], where));
        for (Index j = 0; j < n; ++j) x.push_back(parse_number(cells[static_cast<std::size_t>(1 + j)], where));
        if (has_deriv)
            for (Index j = 0; j < n; ++j) d.push_back(parse_number(cells[static_cast<std::size_t>(1 + n + j)], where));
    }
    const auto m = static_cast<Index>(t.size());
    if (m == 0) throw DataError("'" + path.string() + "' has no data rows");
    TimeSeriesDataset ds;
    ds.times = Eigen::Map<Eigen::VectorXd>(t.data(), m);
    ds.states = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), m, n);
    if (has_deriv)
        ds.derivatives =
            Eigen::MatrixXd(Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                d.data(), m, n));
    ds.state_names = names;
    for (Index i = 1; i < m; ++i)
        if (!(t[static_cast<std::size_t>(i)] > t[static_cast<std::size_t>(i - 1)])) ds.segments.push_back(i);
    ds.meta = {{"source", path.string()}};
    ds.validate();
    return ds;
}

inline void write_pareto_csv(const std::filesystem::path& path, const std::vector<ParetoPoint>& points) {
    auto out = detail::open_for_write(path);
    out << "lambda,nnz,train_res,val_res\n";
    for (const auto& p : points)
        out << format_number(p.lambda) << ',' << p.nnz_total << ',' << format_number(p.train_residual) << ','
            << format_number(p.validation_residual) << '\n';
}

/// Writes `<stem>_modes.csv` (N rows, r columns) and
/// `<stem>_singular_values.csv`. Returns both paths.
inline std::vector<std::filesystem::path> write_basis_csv(const std::filesystem::path& stem, const ReducedBasis& b) {
    const std::filesystem::path modes = stem.string() + "_modes.csv", sv = stem.string() + "_singular_values.csv";
    {
        auto out = detail::open_for_write(modes);
        for (Index j = 0; j < b.rank(); ++j) out << (j ? "," : "") << "psi" << j + 1;
        out << '\n';
        for (Index i = 0; i < b.dimension(); ++i) {
            for (Index j = 0; j < b.rank(); ++j) out << (j ? "," : "") << format_number(b.modes(i, j));
            out << '\n';
        }
    }
    {
        auto out = detail::open_for_write(sv);
        out << "sigma\n";
        for (Index j = 0; j < b.rank(); ++j) out << format_number(b.singular_values[j]) << '\n';
    }
    return {modes, sv};
}

}  // namespace sindykit
