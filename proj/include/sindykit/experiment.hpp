#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>
#include <json.hpp>

#include "sindykit/dataset.hpp"
#include "sindykit/differentiation.hpp"
#include "sindykit/errors.hpp"
#include "sindykit/integrators.hpp"
#include "sindykit/io.hpp"
#include "sindykit/library.hpp"
#include "sindykit/model.hpp"
#include "sindykit/reduction.hpp"
#include "sindykit/regression.hpp"
#include "sindykit/selection.hpp"
#include "sindykit/systems.hpp"

namespace sindykit {

inline constexpr const char* kVersion = "0.1.0";

enum class DiffMethod { Exact, Central, Tv };

inline const char* to_string(DiffMethod d) {
    switch (d) {
        case DiffMethod::Exact: return "Exact";
        case DiffMethod::Central: return "Central";
        case DiffMethod::Tv: return "Tv";
    }
    return "?";
}

struct DifferentiationConfig {
    DiffMethod method = DiffMethod::Exact;
    TvDiffConfig tv;
    /// State columns left undifferentiated (zero derivative) by Tv.
    std::vector<std::string> skip;
    /// Rows dropped at both ends of each segment after differentiation.
    Index trim = 0;
};

struct RunOverride {
    std::map<std::string, double> params;
    std::optional<Eigen::VectorXd> x0;
};

/// Appends a constant state column holding a system parameter, or the time
/// stamps when `param` is "time".
struct AugmentEntry {
    std::string name;
    std::string param;
};

struct EmbedConfig {
    Index dimension = 0;
    std::uint64_t seed = 0;
};

struct FitSection {
    std::string method = "stlsq";
    StlsqConfig stlsq;
    LassoConfig lasso;
    TimeMode mode = TimeMode::ContinuousTime;
};

struct SelectionSection {
    std::vector<double> lambdas;
    SplitConfig split;
};

struct ReductionSection {
    RankPolicy policy = EnergyFraction{0.9999};
    bool remove_mean = false;
};

struct CompareSection {
    double horizon = 20.0;
    /// Output step; 0 means the system dt.
    double dt = 0.0;
    std::vector<double> etas;
    std::vector<Eigen::VectorXd> initial_conditions;
    /// When > 0 the identified model is also run to this time and its
    /// bounding box reported.
    double long_horizon = 0.0;
};

struct ExperimentConfig {
    SystemSpec system;
    std::vector<RunOverride> runs;
    std::vector<AugmentEntry> augment;
    Index steps = 1000;
    std::optional<EmbedConfig> embed;
    IntegratorConfig integrator;
    NoiseSpec noise;
    DifferentiationConfig differentiation;
    LibrarySpec library;
    FitSection fit;
    std::optional<SelectionSection> selection;
    std::optional<ReductionSection> reduction;
    CompareSection compare;
    std::string output_dir = "out";
    nlohmann::json raw;
};

// ---- config parsing -------------------------------------------------------

namespace detail {

inline Eigen::VectorXd to_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + " must be an array of numbers");
    Eigen::VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(what + " must be an array of numbers");
        v[static_cast<Index>(i)] = j[i].get<double>();
    }
    return v;
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

inline std::map<std::string, double> to_params(const nlohmann::json& j) {
    std::map<std::string, double> out;
    if (!j.is_object()) throw ConfigError("params must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError("parameter '" + it.key() + "' must be a number");
        out[it.key()] = it.value().get<double>();
    }
    return out;
}

inline const nlohmann::json& section(const nlohmann::json& root, const char* key) {
    static const nlohmann::json empty = nlohmann::json::object();
    if (!root.contains(key)) return empty;
    const auto& s = root.at(key);
    if (!s.is_object()) throw ConfigError(std::string("config section '") + key + "' must be an object");
    return s;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using detail::get_or;
    using detail::section;
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    if (get_or<int>(root, "spec_version", 0) != 1) throw ConfigError("config needs \"spec_version\": 1");
    ExperimentConfig cfg;
    cfg.raw = root;

    const auto& sys = section(root, "system");
    if (!sys.contains("kind")) throw ConfigError("system.kind is required");
    const auto kind = system_kind_from_string(get_or<std::string>(sys, "kind", ""));
    cfg.system = SystemSpec::make(kind);
    if (sys.contains("params"))
        for (const auto& [k, v] : detail::to_params(sys.at("params"))) cfg.system.params[k] = v;
    if (sys.contains("x0")) cfg.system.x0 = detail::to_vector(sys.at("x0"), "system.x0");
    if (sys.contains("t_span")) {
        const auto span = detail::to_vector(sys.at("t_span"), "system.t_span");
        if (span.size() != 2) throw ConfigError("system.t_span must hold two numbers");
        cfg.system.t0 = span[0];
        cfg.system.t1 = span[1];
    }
    cfg.system.dt = get_or<double>(sys, "dt", cfg.system.dt);
    cfg.steps = get_or<Index>(sys, "steps", cfg.steps);
    if (kind == SystemKind::Logistic && cfg.steps < 1) throw ConfigError("system.steps must be >= 1");
    if (sys.contains("runs")) {
        for (const auto& r : sys.at("runs")) {
            RunOverride o;
            if (r.contains("params")) o.params = detail::to_params(r.at("params"));
            if (r.contains("x0")) o.x0 = detail::to_vector(r.at("x0"), "system.runs[].x0");
            cfg.runs.push_back(std::move(o));
        }
    }
    if (cfg.runs.empty()) cfg.runs.emplace_back();
    if (sys.contains("augment")) {
        for (const auto& a : sys.at("augment")) {
            AugmentEntry e{get_or<std::string>(a, "name", ""), get_or<std::string>(a, "param", "")};
            if (e.name.empty() || e.param.empty()) throw ConfigError("augment entries need name and param");
            cfg.augment.push_back(std::move(e));
        }
    }
    if (kind == SystemKind::Logistic && cfg.augment.size() > 1)
        throw ConfigError("the logistic map takes a single augmented parameter");
    if (sys.contains("embed")) {
        const auto& e = sys.at("embed");
        cfg.embed = EmbedConfig{get_or<Index>(e, "dimension", 0), get_or<std::uint64_t>(e, "seed", 0)};
        if (cfg.embed->dimension < 1) throw ConfigError("system.embed.dimension must be >= 1");
    }
    // Validate the base spec and every run.
    for (const auto& r : cfg.runs) {
        SystemSpec s = cfg.system;
        for (const auto& [k, v] : r.params) s.params[k] = v;
        if (r.x0) s.x0 = *r.x0;
        s.validate();
        for (const auto& a : cfg.augment)
            if (a.param != "time") (void)s.param(a.param);
    }

    const auto& integ = section(root, "integrator");
    cfg.integrator.method = integrator_method_from_string(get_or<std::string>(integ, "method", "RK4Fixed"));
    cfg.integrator.abs_tol = get_or<double>(integ, "abs_tol", cfg.integrator.abs_tol);
    cfg.integrator.rel_tol = get_or<double>(integ, "rel_tol", cfg.integrator.rel_tol);
    cfg.integrator.record_step_size = get_or<bool>(integ, "record_step_size", false);
    if (!(cfg.integrator.abs_tol > 0.0 && cfg.integrator.rel_tol > 0.0))
        throw ConfigError("integrator tolerances must be > 0");

    const auto& noise = section(root, "noise");
    cfg.noise.eta = get_or<double>(noise, "eta", 0.0);
    cfg.noise.target = noise_target_from_string(get_or<std::string>(noise, "target", "Derivatives"));
    cfg.noise.seed = get_or<std::uint64_t>(noise, "seed", 0);
    if (!(cfg.noise.eta >= 0.0)) throw ConfigError("noise.eta must be >= 0");

    const auto& diff = section(root, "differentiation");
    const auto method = get_or<std::string>(diff, "method", "Exact");
    if (method == "Exact")
        cfg.differentiation.method = DiffMethod::Exact;
    else if (method == "Central")
        cfg.differentiation.method = DiffMethod::Central;
    else if (method == "Tv")
        cfg.differentiation.method = DiffMethod::Tv;
    else
        throw ConfigError("unknown differentiation method '" + method + "'");
    auto& tv = cfg.differentiation.tv;
    tv.alpha = get_or<double>(diff, "alpha", tv.alpha);
    tv.iterations = get_or<int>(diff, "iterations", tv.iterations);
    tv.epsilon = get_or<double>(diff, "epsilon", tv.epsilon);
    tv.dt = cfg.system.dt;
    cfg.differentiation.skip = get_or<std::vector<std::string>>(diff, "skip", {});
    cfg.differentiation.trim = get_or<Index>(diff, "trim", 0);
    if (cfg.differentiation.trim < 0) throw ConfigError("differentiation.trim must be >= 0");
    if (get_or<bool>(diff, "svd_denoise", false))
        throw ConfigError("differentiation.svd_denoise is not supported in this version");
    if (cfg.differentiation.method == DiffMethod::Tv) {
        if (!(tv.alpha > 0.0) || !(tv.epsilon > 0.0) || tv.iterations < 1)
            throw ConfigError("Tv differentiation needs alpha > 0, epsilon > 0, iterations >= 1");
    }

    const auto& lib = section(root, "library");
    cfg.library.poly_order = get_or<int>(lib, "poly_order", cfg.library.poly_order);
    cfg.library.include_constant = get_or<bool>(lib, "include_constant", true);
    for (int k : get_or<std::vector<int>>(lib, "trig_harmonics", {})) cfg.library.trig_harmonics.insert(k);
    if (cfg.library.poly_order < 0 || cfg.library.poly_order > kMaxPolyOrder)
        throw ConfigError("library.poly_order must lie in [0, " + std::to_string(kMaxPolyOrder) + "]");
    for (int k : cfg.library.trig_harmonics)
        if (k < 1) throw ConfigError("library.trig_harmonics must be positive");

    const auto& fit = section(root, "fit");
    cfg.fit.method = get_or<std::string>(fit, "method", "stlsq");
    if (cfg.fit.method != "stlsq" && cfg.fit.method != "lasso")
        throw ConfigError("fit.method must be stlsq or lasso");
    cfg.fit.stlsq.lambda = get_or<double>(fit, "lambda", cfg.fit.stlsq.lambda);
    cfg.fit.stlsq.max_iterations = get_or<int>(fit, "max_iterations", cfg.fit.stlsq.max_iterations);
    cfg.fit.stlsq.convergence = convergence_from_string(get_or<std::string>(fit, "convergence", "SupportStable"));
    cfg.fit.lasso.lambda1 = get_or<double>(fit, "lambda1", cfg.fit.lasso.lambda1);
    cfg.fit.lasso.tol = get_or<double>(fit, "tol", cfg.fit.lasso.tol);
    cfg.fit.lasso.max_sweeps = get_or<int>(fit, "max_sweeps", cfg.fit.lasso.max_sweeps);
    cfg.fit.mode = time_mode_from_string(
        get_or<std::string>(fit, "mode", kind == SystemKind::Logistic ? "DiscreteTime" : "ContinuousTime"));
    try {
        cfg.fit.stlsq.validate();
        cfg.fit.lasso.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    if (kind == SystemKind::Logistic && cfg.fit.mode != TimeMode::DiscreteTime)
        throw ConfigError("the logistic map must be fitted in DiscreteTime mode");

    if (root.contains("selection")) {
        const auto& sel = section(root, "selection");
        SelectionSection s;
        if (sel.contains("lambdas")) {
            s.lambdas = get_or<std::vector<double>>(sel, "lambdas", {});
        } else if (sel.contains("log_grid")) {
            const auto& g = sel.at("log_grid");
            s.lambdas = log_grid(get_or<double>(g, "min", 0.0), get_or<double>(g, "max", 0.0),
                                 get_or<int>(g, "count", 0));
        } else {
            throw ConfigError("selection needs lambdas or log_grid");
        }
        validate_lambda_grid(s.lambdas);
        s.split.fraction = get_or<double>(sel, "validation_fraction", s.split.fraction);
        s.split.policy = split_policy_from_string(get_or<std::string>(sel, "policy", "Tail"));
        s.split.seed = get_or<std::uint64_t>(sel, "seed", 0);
        s.split.blocks = get_or<Index>(sel, "blocks", s.split.blocks);
        cfg.selection = std::move(s);
    }

    if (root.contains("reduction")) {
        const auto& red = section(root, "reduction");
        ReductionSection r;
        if (red.contains("rank"))
            r.policy = FixedRank{get_or<Index>(red, "rank", 1)};
        else
            r.policy = EnergyFraction{get_or<double>(red, "energy_fraction", 0.9999)};
        if (const auto* ef = std::get_if<EnergyFraction>(&r.policy))
            if (!(ef->e > 0.0 && ef->e <= 1.0)) throw ConfigError("reduction.energy_fraction must lie in (0, 1]");
        r.remove_mean = get_or<bool>(red, "remove_mean", false);
        cfg.reduction = r;
    }

    const auto& cmp = section(root, "compare");
    cfg.compare.horizon = get_or<double>(cmp, "horizon", cfg.compare.horizon);
    cfg.compare.dt = get_or<double>(cmp, "dt", 0.0);
    cfg.compare.etas = get_or<std::vector<double>>(cmp, "etas", {});
    cfg.compare.long_horizon = get_or<double>(cmp, "long_horizon", 0.0);
    if (cmp.contains("initial_conditions"))
        for (const auto& ic : cmp.at("initial_conditions"))
            cfg.compare.initial_conditions.push_back(detail::to_vector(ic, "compare.initial_conditions[]"));
    if (!(cfg.compare.horizon > 0.0)) throw ConfigError("compare.horizon must be > 0");

    const auto& outs = section(root, "outputs");
    cfg.output_dir = get_or<std::string>(outs, "directory", cfg.output_dir);
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_json(path)); }

/// Command-line overrides take precedence over the file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
};

inline nlohmann::json apply_overrides(nlohmann::json raw, const Overrides& o) {
    if (o.seed) raw["noise"]["seed"] = *o.seed;
    if (o.lambda) raw["fit"]["lambda"] = *o.lambda;
    return raw;
}

/// FNV-1a over the canonical (key-sorted, compact) dump.
inline std::string config_hash(const nlohmann::json& raw) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : raw.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// ---- pipeline -------------------------------------------------------------

inline SystemSpec run_spec(const ExperimentConfig& cfg, std::size_t run) {
    SystemSpec s = cfg.system;
    const auto& o = cfg.runs.at(run);
    for (const auto& [k, v] : o.params) s.params[k] = v;
    if (o.x0) s.x0 = *o.x0;
    return s;
}

/// Seeded N x n matrix with orthonormal columns.
inline Eigen::MatrixXd embedding_matrix(Index dimension, Index n, std::uint64_t seed) {
    detail::require(dimension >= n, "embedding dimension must be >= the state count");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(dimension, n);
    for (Index i = 0; i < dimension; ++i)
        for (Index j = 0; j < n; ++j) g(i, j) = normal(gen);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    return qr.householderQ() * Eigen::MatrixXd::Identity(dimension, n);
}

/// States (and derivatives) mapped to x Q^T row by row.
inline TimeSeriesDataset embed(const TimeSeriesDataset& ds, const Eigen::MatrixXd& q) {
    detail::require(q.cols() == ds.n_states(), "embed: dimension mismatch");
    TimeSeriesDataset out;
    out.times = ds.times;
    out.segments = ds.segments;
    out.states = ds.states * q.transpose();
    if (ds.derivatives) out.derivatives = Eigen::MatrixXd(*ds.derivatives * q.transpose());
    std::vector<std::string> names;
    for (Index i = 0; i < q.rows(); ++i) names.push_back("q" + std::to_string(i + 1));
    out.state_names = std::move(names);
    out.meta = ds.meta;
    out.validate();
    return out;
}

inline TimeSeriesDataset differentiate(TimeSeriesDataset ds, const DifferentiationConfig& d) {
    switch (d.method) {
        case DiffMethod::Exact:
            if (!ds.derivatives)
                throw DataError(
                    "differentiation is Exact but the data carries no derivatives; use Central or Tv for "
                    "external data");
            return ds;
        case DiffMethod::Central: return trim_segments(with_central_difference(std::move(ds)), d.trim);
        case DiffMethod::Tv: {
            TvDiffConfig tv = d.tv;
            if (ds.rows() >= 2) tv.dt = ds.times[1] - ds.times[0];
            return trim_segments(with_tv_derivative(std::move(ds), tv, d.skip), d.trim);
        }
    }
    return ds;
}

struct GeneratedData {
    std::vector<TimeSeriesDataset> runs;
    TimeSeriesDataset combined;
};

/// Per run: simulate (or iterate the map), add noise with seed + run index,
/// differentiate, then augment. Runs are stacked as segments.
inline GeneratedData generate_data(const ExperimentConfig& cfg, std::optional<double> eta = std::nullopt) {
    GeneratedData out;
    for (std::size_t r = 0; r < cfg.runs.size(); ++r) {
        const SystemSpec spec = run_spec(cfg, r);
        NoiseSpec noise = cfg.noise;
        if (eta) noise.eta = *eta;
        noise.seed = cfg.noise.seed + r;
        TimeSeriesDataset ds;
        if (spec.kind == SystemKind::Logistic) {
            ds = iterate_map(spec, cfg.steps, noise, cfg.augment.empty() ? "r" : cfg.augment.front().name);
        } else {
            ds = simulate(spec, cfg.integrator);
            ds = add_noise(std::move(ds), noise);
            if (cfg.differentiation.method != DiffMethod::Exact) ds = differentiate(std::move(ds), cfg.differentiation);
            for (const auto& a : cfg.augment)
                ds = a.param == "time" ? augment_time(std::move(ds), a.name)
                                       : augment(std::move(ds), a.name, spec.param(a.param));
        }
        ds.meta["run"] = r;
        out.runs.push_back(std::move(ds));
    }
    out.combined = out.runs.size() == 1 ? out.runs.front() : concatenate(out.runs);
    if (cfg.embed) {
        const auto q = embedding_matrix(cfg.embed->dimension, out.combined.n_states(), cfg.embed->seed);
        for (auto& r : out.runs) r = embed(r, q);
        out.combined = embed(out.combined, q);
        out.combined.meta["embed"] = {{"dimension", cfg.embed->dimension}, {"seed", cfg.embed->seed}};
    }
    return out;
}

struct FitOutcome {
    StlsqResult result;
    std::optional<ReducedBasis> basis;
    TimeSeriesDataset data;
    LibrarySpec library;
};

/// Reduction (if configured) followed by the configured regression.
inline TimeSeriesDataset prepare_for_fit(const ExperimentConfig& cfg, TimeSeriesDataset ds,
                                         std::optional<ReducedBasis>* basis_out = nullptr) {
    if (cfg.reduction) {
        auto basis = compute_basis(ds.states, cfg.reduction->policy, cfg.reduction->remove_mean);
        ds = reduce_dataset(ds, basis);
        if (basis_out) *basis_out = std::move(basis);
    }
    return ds;
}

inline LibrarySpec library_for(const ExperimentConfig& cfg, const TimeSeriesDataset& ds) {
    LibrarySpec lib = cfg.library;
    lib.n_states = static_cast<int>(ds.n_states());
    try {
        lib.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    return lib;
}

inline FitOutcome fit_configured(const ExperimentConfig& cfg, TimeSeriesDataset ds) {
    FitOutcome out;
    out.data = prepare_for_fit(cfg, std::move(ds), &out.basis);
    if (out.data.rows() == 0) throw DataError("dataset is empty");
    out.library = library_for(cfg, out.data);
    out.result = cfg.fit.method == "lasso" ? fit_lasso(out.data, out.library, cfg.fit.lasso, cfg.fit.mode)
                                           : fit(out.data, out.library, cfg.fit.stlsq, cfg.fit.mode);
    return out;
}

// ---- comparison -----------------------------------------------------------

struct ErrorCurve {
    std::string label;
    Eigen::VectorXd error;
    bool failed = false;
    std::string message;
    /// Bounding box of the identified-model trajectory over the long
    /// horizon, when requested.
    std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> long_bounds;
};

/// ||x_true(t) - x_model(t)||_2 on the comparison grid. The model may carry
/// augmented parameter columns; they are seeded from the run's parameters
/// and excluded from the error.
inline ErrorCurve compare_one(const ExperimentConfig& cfg, const SystemSpec& spec, const SparseModel& model,
                              const Eigen::VectorXd& ic, const std::string& label) {
    ErrorCurve c;
    c.label = label;
    const Index n = ic.size();
    Eigen::VectorXd x0m(model.n_states());
    detail::require(model.n_states() >= n, "compare: model has fewer states than the system");
    x0m.head(n) = ic;
    for (std::size_t k = 0; k < cfg.augment.size() && n + static_cast<Index>(k) < model.n_states(); ++k) {
        const auto& a = cfg.augment[k];
        x0m[n + static_cast<Index>(k)] = a.param == "time" ? 0.0 : spec.param(a.param);
    }
    if (spec.kind == SystemKind::Logistic && model.n_states() == 2) x0m[1] = spec.param("mu");
    try {
        if (spec.kind == SystemKind::Logistic) {
            detail::require(model.mode == TimeMode::DiscreteTime, "compare: model mode does not match the system");
            const auto steps = static_cast<Index>(std::llround(cfg.compare.horizon));
            SystemSpec s = spec;
            s.x0 = ic.head(1);
            const auto truth = iterate_map(s, steps, NoiseSpec{});
            const auto pred = iterate_model(model, x0m, truth.rows() - 1);
            c.error = (truth.states.col(0) - pred.col(0)).cwiseAbs();
            return c;
        }
        detail::require(model.mode == TimeMode::ContinuousTime, "compare: model mode does not match the system");
        const double dt = cfg.compare.dt > 0.0 ? cfg.compare.dt : spec.dt;
        const Index count = grid_count(0.0, cfg.compare.horizon, dt);
        SystemSpec s = spec;
        s.x0 = ic;
        const auto truth = integrate(make_rhs(s), ic, 0.0, dt, count, cfg.integrator);
        const auto pred = simulate_model(model, x0m, 0.0, dt, count, cfg.integrator);
        c.error = (truth.states - pred.states.leftCols(n)).rowwise().norm();
    } catch (const NumericalError& e) {
        c.failed = true;
        c.message = e.what();
        c.error.resize(0);
        return c;
    }
    if (cfg.compare.long_horizon > 0.0) {
        try {
            const double dt = cfg.compare.dt > 0.0 ? cfg.compare.dt : spec.dt;
            const auto longrun =
                simulate_model(model, x0m, 0.0, dt, grid_count(0.0, cfg.compare.long_horizon, dt), cfg.integrator);
            c.long_bounds = std::make_pair(Eigen::VectorXd(longrun.states.colwise().minCoeff().transpose()),
                                           Eigen::VectorXd(longrun.states.colwise().maxCoeff().transpose()));
        } catch (const NumericalError& e) {
            c.message = std::string("long horizon: ") + e.what();
        }
    }
    return c;
}

// ---- commands -------------------------------------------------------------

struct CommandOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> data;
    std::optional<std::filesystem::path> model;
};

namespace detail {

inline nlohmann::json report_header(const ExperimentConfig& cfg, const std::string& command) {
    nlohmann::json seeds = {{"noise", cfg.noise.seed}};
    if (cfg.selection) seeds["split"] = cfg.selection->split.seed;
    if (cfg.embed) seeds["embed"] = cfg.embed->seed;
    return {{"command", command},
            {"provenance", {{"config_hash", config_hash(cfg.raw)}, {"seeds", seeds}, {"version", kVersion}}},
            {"config", cfg.raw},
            {"files", nlohmann::json::array()}};
}

inline void emit(nlohmann::json& report, const std::filesystem::path& dir, const std::string& name,
                 const std::string& text) {
    write_text(dir / name, text);
    report["files"].push_back(name);
}

inline void finish(nlohmann::json& report, const std::filesystem::path& dir) {
    report["files"].push_back("run_report.json");
    write_json(dir / "run_report.json", report);
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("cannot create output directory '" + dir.string() + "'");
}

inline void emit_fit(nlohmann::json& report, const std::filesystem::path& dir, const FitOutcome& f) {
    emit(report, dir, "model.json", to_json(f.result.model).dump(2) + "\n");
    const auto table = render_table(f.result.model, 4);
    emit(report, dir, "model_table.txt", table);
    emit(report, dir, "fit_report.json", to_json(f.result.report).dump(2) + "\n");
    report["table"] = table;
    report["fit_report"] = to_json(f.result.report);
    report["nnz"] = f.result.model.nnz();
    if (f.basis) {
        for (const auto& p : write_basis_csv(dir / "basis", *f.basis)) report["files"].push_back(p.filename().string());
        report["reduction"] = {{"rank", f.basis->rank()}};
    }
}

inline TimeSeriesDataset input_data(const ExperimentConfig& cfg, const CommandOptions& opt) {
    if (!opt.data) return generate_data(cfg).combined;
    auto ds = read_csv(*opt.data);
    if (cfg.fit.mode == TimeMode::ContinuousTime) ds = differentiate(std::move(ds), cfg.differentiation);
    return ds;
}

}  // namespace detail

inline nlohmann::json cmd_generate(const ExperimentConfig& cfg, const CommandOptions& opt) {
    detail::ensure_dir(opt.out_dir);
    auto report = detail::report_header(cfg, "generate");
    const auto data = generate_data(cfg);
    if (data.runs.size() > 1) {
        for (std::size_t r = 0; r < data.runs.size(); ++r) {
            std::ostringstream name;
            name << "run_" << (r < 10 ? "0" : "") << r << ".csv";
            write_csv(opt.out_dir / name.str(), data.runs[r]);
            report["files"].push_back(name.str());
        }
    }
    write_csv(opt.out_dir / "data.csv", data.combined);
    report["files"].push_back("data.csv");
    if (cfg.integrator.record_step_size && data.runs.front().meta.contains("step_sizes")) {
        std::ostringstream os;
        os << "t,h\n";
        const auto& h = data.runs.front().meta["step_sizes"];
        for (std::size_t i = 0; i < h.size(); ++i)
            os << format_number(data.runs.front().times[static_cast<Index>(i)]) << ',' << format_number(h[i]) << '\n';
        detail::emit(report, opt.out_dir, "step_sizes.csv", os.str());
    }
    report["rows"] = data.combined.rows();
    report["runs"] = data.runs.size();
    detail::finish(report, opt.out_dir);
    return report;
}

inline nlohmann::json cmd_fit(const ExperimentConfig& cfg, const CommandOptions& opt) {
    detail::ensure_dir(opt.out_dir);
    auto report = detail::report_header(cfg, "fit");
    const auto f = fit_configured(cfg, detail::input_data(cfg, opt));
    detail::emit_fit(report, opt.out_dir, f);
    detail::finish(report, opt.out_dir);
    return report;
}

inline nlohmann::json cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt) {
    if (!cfg.selection) throw ConfigError("sweep needs a selection section");
    detail::ensure_dir(opt.out_dir);
    auto report = detail::report_header(cfg, "sweep");
    std::optional<ReducedBasis> basis;
    const auto ds = prepare_for_fit(cfg, detail::input_data(cfg, opt), &basis);
    const auto lib = library_for(cfg, ds);
    const auto sw = sweep(ds, lib, cfg.selection->lambdas, cfg.selection->split, cfg.fit.stlsq, cfg.fit.mode);
    write_pareto_csv(opt.out_dir / "pareto.csv", sw.points);
    report["files"].push_back("pareto.csv");
    const auto pick = pick_elbow(sw.points);
    report["chosen_lambda"] = pick.lambda;
    report["elbow_fallback"] = pick.fallback;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : sw.points)
        pts.push_back({{"lambda", p.lambda},
                       {"nnz", p.nnz_total},
                       {"train_residual", p.train_residual},
                       {"validation_residual", p.validation_residual}});
    report["pareto"] = pts;
    // The chosen model is refitted on all rows.
    ExperimentConfig chosen = cfg;
    chosen.fit.stlsq.lambda = pick.lambda;
    chosen.reduction.reset();
    FitOutcome f;
    f.data = ds;
    f.library = lib;
    f.basis = basis;
    f.result = fit(ds, lib, chosen.fit.stlsq, cfg.fit.mode);
    detail::emit_fit(report, opt.out_dir, f);
    detail::finish(report, opt.out_dir);
    return report;
}

/// Error-vs-time between the true system and identified models. With
/// compare.etas set, one model is fitted per noise level; otherwise the
/// model comes from --model or a fit of the configured pipeline.
inline nlohmann::json cmd_compare(const ExperimentConfig& cfg, const CommandOptions& opt) {
    if (cfg.reduction || cfg.embed) throw ConfigError("compare does not support reduced or embedded systems");
    detail::ensure_dir(opt.out_dir);
    auto report = detail::report_header(cfg, "compare");
    std::vector<std::pair<std::string, SparseModel>> models;
    if (!cfg.compare.etas.empty()) {
        for (double eta : cfg.compare.etas) {
            const auto f = fit_configured(cfg, generate_data(cfg, eta).combined);
            models.emplace_back("eta=" + detail::shortest_repr(eta), f.result.model);
        }
    } else if (opt.model) {
        models.emplace_back("model", model_from_json(read_json(*opt.model)));
    } else {
        models.emplace_back("model", fit_configured(cfg, generate_data(cfg).combined).result.model);
    }
    const SystemSpec spec = run_spec(cfg, 0);
    std::vector<Eigen::VectorXd> ics = cfg.compare.initial_conditions;
    if (ics.empty()) ics.push_back(spec.x0);
    for (const auto& ic : ics)
        if (ic.size() != state_dimension(spec.kind)) throw ConfigError("compare initial condition has wrong size");

    std::vector<ErrorCurve> curves;
    for (const auto& [label, m] : models)
        for (std::size_t i = 0; i < ics.size(); ++i)
            curves.push_back(compare_one(cfg, spec, m, ics[i], label + ";ic=" + std::to_string(i)));

    const bool discrete = spec.kind == SystemKind::Logistic;
    const double dt = discrete ? 1.0 : (cfg.compare.dt > 0.0 ? cfg.compare.dt : spec.dt);
    Index rows = 0;
    for (const auto& c : curves) rows = std::max(rows, c.error.size());
    std::ostringstream os;
    os << 't';
    for (const auto& c : curves)
        if (!c.failed) os << ',' << c.label;
    os << '\n';
    for (Index i = 0; i < rows; ++i) {
        os << format_number(static_cast<double>(i) * dt);
        for (const auto& c : curves)
            if (!c.failed) os << ',' << (i < c.error.size() ? format_number(c.error[i]) : std::string("nan"));
        os << '\n';
    }
    detail::emit(report, opt.out_dir, "error_vs_time.csv", os.str());
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& c : curves) {
        nlohmann::json s = {{"label", c.label}, {"failed", c.failed}};
        if (c.failed) {
            s["message"] = c.message;
        } else {
            s["max_error"] = c.error.size() ? c.error.maxCoeff() : 0.0;
            s["final_error"] = c.error.size() ? c.error[c.error.size() - 1] : 0.0;
        }
        if (c.long_bounds) {
            s["long_horizon_min"] = std::vector<double>(c.long_bounds->first.data(),
                                                        c.long_bounds->first.data() + c.long_bounds->first.size());
            s["long_horizon_max"] = std::vector<double>(c.long_bounds->second.data(),
                                                        c.long_bounds->second.data() + c.long_bounds->second.size());
        }
        summary.push_back(s);
    }
    report["curves"] = summary;
    detail::finish(report, opt.out_dir);
    return report;
}

}  // namespace sindykit
