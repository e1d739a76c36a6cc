#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "sindykit/dataset.hpp"
#include "sindykit/differentiation.hpp"
#include "sindykit/errors.hpp"
#include "sindykit/integrators.hpp"
#include "sindykit/library.hpp"
#include "sindykit/model.hpp"

namespace sindykit {

enum class SystemKind { Linear2D, Cubic2D, Linear3D, Lorenz, MeanField3D, Logistic, Hopf };

inline const char* to_string(SystemKind k) {
    switch (k) {
        case SystemKind::Linear2D: return "Linear2D";
        case SystemKind::Cubic2D: return "Cubic2D";
        case SystemKind::Linear3D: return "Linear3D";
        case SystemKind::Lorenz: return "Lorenz";
        case SystemKind::MeanField3D: return "MeanField3D";
        case SystemKind::Logistic: return "Logistic";
        case SystemKind::Hopf: return "Hopf";
    }
    return "?";
}

inline SystemKind system_kind_from_string(const std::string& s) {
    for (auto k : {SystemKind::Linear2D, SystemKind::Cubic2D, SystemKind::Linear3D, SystemKind::Lorenz,
                   SystemKind::MeanField3D, SystemKind::Logistic, SystemKind::Hopf})
        if (s == to_string(k)) return k;
    throw ConfigError("unknown system kind '" + s + "'");
}

inline int state_dimension(SystemKind k) {
    switch (k) {
        case SystemKind::Linear2D:
        case SystemKind::Cubic2D:
        case SystemKind::Hopf: return 2;
        case SystemKind::Linear3D:
        case SystemKind::Lorenz:
        case SystemKind::MeanField3D: return 3;
        case SystemKind::Logistic: return 1;
    }
    return 0;
}

/// Parameter names each kind requires, with their defaults.
inline std::map<std::string, double> default_params(SystemKind k) {
    switch (k) {
        case SystemKind::Lorenz: return {{"sigma", 10.0}, {"beta", 8.0 / 3.0}, {"rho", 28.0}};
        case SystemKind::MeanField3D: return {{"mu", 0.1}, {"omega", 1.0}, {"A", -0.1}, {"lambda", 10.0}};
        // omega and A are not pinned by the normal form; unit values make the
        // cubic coefficients exactly -1.
        case SystemKind::Hopf: return {{"mu", 0.0}, {"omega", 1.0}, {"A", 1.0}};
        case SystemKind::Logistic: return {{"mu", 2.5}};
        default: return {};
    }
}

inline Eigen::VectorXd default_initial_state(SystemKind k) {
    switch (k) {
        case SystemKind::Linear2D:
        case SystemKind::Cubic2D: return Eigen::Vector2d(2.0, 0.0);
        case SystemKind::Linear3D: return Eigen::Vector3d(2.0, 0.0, 1.0);
        case SystemKind::Lorenz: return Eigen::Vector3d(-8.0, 7.0, 27.0);
        case SystemKind::MeanField3D: return Eigen::Vector3d(0.1, 0.0, 0.01);
        case SystemKind::Hopf: return Eigen::Vector2d(1.0, 0.0);
        case SystemKind::Logistic: return Eigen::VectorXd::Constant(1, 0.5);
    }
    return {};
}

struct SystemSpec {
    SystemKind kind = SystemKind::Lorenz;
    std::map<std::string, double> params;
    Eigen::VectorXd x0;
    double t0 = 0.0;
    double t1 = 1.0;
    double dt = 0.01;

    static SystemSpec make(SystemKind kind, double t0 = 0.0, double t1 = 1.0, double dt = 0.01) {
        SystemSpec s;
        s.kind = kind;
        s.params = default_params(kind);
        s.x0 = default_initial_state(kind);
        s.t0 = t0;
        s.t1 = t1;
        s.dt = dt;
        return s;
    }

    double param(const std::string& name) const {
        auto it = params.find(name);
        if (it == params.end())
            throw ConfigError(std::string("system ") + to_string(kind) + " is missing parameter '" + name + "'");
        return it->second;
    }

    void validate() const {
        for (const auto& [name, _] : default_params(kind)) (void)param(name);
        if (x0.size() != state_dimension(kind))
            throw ConfigError(std::string("initial state for ") + to_string(kind) + " must have " +
                              std::to_string(state_dimension(kind)) + " entries");
        if (kind != SystemKind::Logistic) {
            if (!(t1 > t0)) throw ConfigError("time span must satisfy t1 > t0");
            if (!(dt > 0.0)) throw ConfigError("time step must be > 0");
        }
        if (kind == SystemKind::MeanField3D && !(param("lambda") > 0.0))
            throw ConfigError("mean-field relaxation rate lambda must be > 0");
    }
};

/// Analytic right-hand side of a continuous-time system.
inline Rhs make_rhs(const SystemSpec& spec) {
    switch (spec.kind) {
        case SystemKind::Linear2D:
            return [](double, const Eigen::VectorXd& s) {
                return Eigen::VectorXd(Eigen::Vector2d(-0.1 * s[0] + 2.0 * s[1], -2.0 * s[0] - 0.1 * s[1]));
            };
        case SystemKind::Cubic2D:
            return [](double, const Eigen::VectorXd& s) {
                const double x3 = s[0] * s[0] * s[0], y3 = s[1] * s[1] * s[1];
                return Eigen::VectorXd(Eigen::Vector2d(-0.1 * x3 + 2.0 * y3, -2.0 * x3 - 0.1 * y3));
            };
        case SystemKind::Linear3D:
            return [](double, const Eigen::VectorXd& s) {
                return Eigen::VectorXd(
                    Eigen::Vector3d(-0.1 * s[0] + 2.0 * s[1], -2.0 * s[0] - 0.1 * s[1], -0.3 * s[2]));
            };
        case SystemKind::Lorenz: {
            const double sigma = spec.param("sigma"), beta = spec.param("beta"), rho = spec.param("rho");
            return [=](double, const Eigen::VectorXd& s) {
                return Eigen::VectorXd(Eigen::Vector3d(sigma * (s[1] - s[0]), s[0] * (rho - s[2]) - s[1],
                                                       s[0] * s[1] - beta * s[2]));
            };
        }
        case SystemKind::MeanField3D: {
            const double mu = spec.param("mu"), om = spec.param("omega"), a = spec.param("A"),
                         lam = spec.param("lambda");
            return [=](double, const Eigen::VectorXd& s) {
                const double x = s[0], y = s[1], z = s[2];
                return Eigen::VectorXd(Eigen::Vector3d(mu * x - om * y + a * x * z, om * x + mu * y + a * y * z,
                                                       -lam * (z - x * x - y * y)));
            };
        }
        case SystemKind::Hopf: {
            const double mu = spec.param("mu"), om = spec.param("omega"), a = spec.param("A");
            return [=](double, const Eigen::VectorXd& s) {
                const double x = s[0], y = s[1], r2 = x * x + y * y;
                return Eigen::VectorXd(Eigen::Vector2d(mu * x + om * y - a * x * r2, -om * x + mu * y - a * y * r2));
            };
        }
        case SystemKind::Logistic: break;
    }
    throw ConfigError("the logistic map is discrete; use iterate_map");
}

namespace detail {

inline void set_coefficient(SparseModel& m, std::vector<int> exps, Eigen::Index eq, double value) {
    const auto t = TermDescriptor::monomial(std::move(exps));
    for (std::size_t j = 0; j < m.terms.size(); ++j)
        if (m.terms[j] == t) {
            m.coefficients(static_cast<Eigen::Index>(j), eq) = value;
            return;
        }
    throw ContractViolation("reference term not present in the library");
}

}  // namespace detail

/// The true system written as coefficients over the given polynomial
/// library (which must contain every true term).
inline SparseModel reference_model(const SystemSpec& spec, const LibrarySpec& lib) {
    spec.validate();
    const int n = state_dimension(spec.kind);
    detail::require(lib.n_states == n, "reference_model: library state count mismatch");
    auto m = zero_model(enumerate_terms(lib), default_state_names(static_cast<std::size_t>(n)),
                        spec.kind == SystemKind::Logistic ? TimeMode::DiscreteTime : TimeMode::ContinuousTime);
    using detail::set_coefficient;
    switch (spec.kind) {
        case SystemKind::Linear2D:
            set_coefficient(m, {1, 0}, 0, -0.1), set_coefficient(m, {0, 1}, 0, 2.0);
            set_coefficient(m, {1, 0}, 1, -2.0), set_coefficient(m, {0, 1}, 1, -0.1);
            break;
        case SystemKind::Cubic2D:
            set_coefficient(m, {3, 0}, 0, -0.1), set_coefficient(m, {0, 3}, 0, 2.0);
            set_coefficient(m, {3, 0}, 1, -2.0), set_coefficient(m, {0, 3}, 1, -0.1);
            break;
        case SystemKind::Linear3D:
            set_coefficient(m, {1, 0, 0}, 0, -0.1), set_coefficient(m, {0, 1, 0}, 0, 2.0);
            set_coefficient(m, {1, 0, 0}, 1, -2.0), set_coefficient(m, {0, 1, 0}, 1, -0.1);
            set_coefficient(m, {0, 0, 1}, 2, -0.3);
            break;
        case SystemKind::Lorenz: {
            const double sigma = spec.param("sigma"), beta = spec.param("beta"), rho = spec.param("rho");
            set_coefficient(m, {1, 0, 0}, 0, -sigma), set_coefficient(m, {0, 1, 0}, 0, sigma);
            set_coefficient(m, {1, 0, 0}, 1, rho), set_coefficient(m, {0, 1, 0}, 1, -1.0);
            set_coefficient(m, {1, 0, 1}, 1, -1.0);
            set_coefficient(m, {0, 0, 1}, 2, -beta), set_coefficient(m, {1, 1, 0}, 2, 1.0);
            break;
        }
        case SystemKind::MeanField3D: {
            const double mu = spec.param("mu"), om = spec.param("omega"), a = spec.param("A"),
                         lam = spec.param("lambda");
            set_coefficient(m, {1, 0, 0}, 0, mu), set_coefficient(m, {0, 1, 0}, 0, -om);
            set_coefficient(m, {1, 0, 1}, 0, a);
            set_coefficient(m, {1, 0, 0}, 1, om), set_coefficient(m, {0, 1, 0}, 1, mu);
            set_coefficient(m, {0, 1, 1}, 1, a);
            set_coefficient(m, {0, 0, 1}, 2, -lam), set_coefficient(m, {2, 0, 0}, 2, lam);
            set_coefficient(m, {0, 2, 0}, 2, lam);
            break;
        }
        case SystemKind::Hopf: {
            const double mu = spec.param("mu"), om = spec.param("omega"), a = spec.param("A");
            set_coefficient(m, {1, 0}, 0, mu), set_coefficient(m, {0, 1}, 0, om);
            set_coefficient(m, {3, 0}, 0, -a), set_coefficient(m, {1, 2}, 0, -a);
            set_coefficient(m, {1, 0}, 1, -om), set_coefficient(m, {0, 1}, 1, mu);
            set_coefficient(m, {2, 1}, 1, -a), set_coefficient(m, {0, 3}, 1, -a);
            break;
        }
        case SystemKind::Logistic: {
            const double mu = spec.param("mu");
            set_coefficient(m, {1}, 0, mu), set_coefficient(m, {2}, 0, -mu);
            break;
        }
    }
    return m;
}

inline nlohmann::json provenance(const SystemSpec& spec) {
    return {{"system", to_string(spec.kind)},
            {"params", spec.params},
            {"x0", std::vector<double>(spec.x0.data(), spec.x0.data() + spec.x0.size())},
            {"t_span", {spec.t0, spec.t1}},
            {"dt", spec.dt}};
}

/// Samples a continuous system on its uniform grid. Derivatives are the
/// analytic right-hand side at the sampled states.
inline TimeSeriesDataset simulate(const SystemSpec& spec, const IntegratorConfig& integ = {}) {
    spec.validate();
    if (spec.kind == SystemKind::Logistic) throw ConfigError("the logistic map is discrete; use iterate_map");
    const Rhs f = make_rhs(spec);
    const auto tr = integrate(f, spec.x0, spec.t0, spec.dt, grid_count(spec.t0, spec.t1, spec.dt), integ);
    Eigen::MatrixXd d(tr.states.rows(), tr.states.cols());
    for (Eigen::Index i = 0; i < tr.states.rows(); ++i) d.row(i) = f(tr.times[i], tr.states.row(i).transpose()).transpose();
    auto ds = make_dataset(tr.times, tr.states, std::move(d));
    ds.meta = provenance(spec);
    ds.meta["integrator"] = to_string(integ.method);
    if (integ.record_step_size)
        ds.meta["step_sizes"] = std::vector<double>(tr.step_sizes.data(), tr.step_sizes.data() + tr.step_sizes.size());
    return ds;
}

/// Simulates an identified continuous-time model from x0 on the grid
/// t0 + k dt, k < count.
inline Trajectory simulate_model(const SparseModel& model, const Eigen::VectorXd& x0, double t0, double dt,
                                 Eigen::Index count, const IntegratorConfig& integ = {}) {
    detail::require(model.mode == TimeMode::ContinuousTime, "simulate_model needs a continuous-time model");
    const Rhs f = [&model](double, const Eigen::VectorXd& x) { return evaluate_rhs(model, x); };
    return integrate(f, x0, t0, dt, count, integ);
}

/// Iterates a discrete-time model x_{k+1} = Theta(x_k) Xi.
inline Eigen::MatrixXd iterate_model(const SparseModel& model, const Eigen::VectorXd& x0, Eigen::Index steps) {
    detail::require(model.mode == TimeMode::DiscreteTime, "iterate_model needs a discrete-time model");
    Eigen::MatrixXd out(steps + 1, x0.size());
    Eigen::VectorXd x = x0;
    out.row(0) = x.transpose();
    for (Eigen::Index k = 1; k <= steps; ++k) {
        x = evaluate_rhs(model, x);
        out.row(k) = x.transpose();
    }
    return out;
}

// ---- discrete map ---------------------------------------------------------

/// x_{k+1} = mu x_k (1 - x_k) + eta_k with eta_k ~ N(0, noise.eta^2), seeded.
/// The parameter is appended as a constant state column (`param_name`) so
/// the result can be fitted in the augmented (x, mu) space. Returns
/// n_steps + 1 samples unless an iterate leaves [-0.5, 1.5], in which case
/// the run is truncated before that iterate and meta records a warning.
inline TimeSeriesDataset iterate_map(const SystemSpec& spec, Eigen::Index n_steps, const NoiseSpec& noise = {},
                                     const std::string& param_name = "r") {
    detail::require(spec.kind == SystemKind::Logistic, "iterate_map only supports the logistic map");
    spec.validate();
    const double mu = spec.param("mu");
    const double x0 = spec.x0[0];
    if (!(x0 > 0.0 && x0 < 1.0)) throw ConfigError("logistic x0 must lie in (0, 1)");
    if (!(mu > 0.0 && mu <= 4.0)) throw ConfigError("logistic mu must lie in (0, 4]");
    detail::require(n_steps >= 1, "iterate_map needs at least one step");
    std::mt19937_64 gen(noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> xs{x0};
    nlohmann::json warn;
    for (Eigen::Index k = 0; k < n_steps; ++k) {
        const double x = xs.back();
        const double next = mu * x * (1.0 - x) + (noise.eta > 0.0 ? noise.eta * normal(gen) : 0.0);
        if (next < -0.5 || next > 1.5) {
            warn = "iterate escaped [-0.5, 1.5] at step " + std::to_string(k + 1) + "; trajectory truncated";
            break;
        }
        xs.push_back(next);
    }
    const auto m = static_cast<Eigen::Index>(xs.size());
    Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(m, 0.0, static_cast<double>(m - 1));
    Eigen::MatrixXd states(m, 2);
    states.col(0) = Eigen::Map<const Eigen::VectorXd>(xs.data(), m);
    states.col(1).setConstant(mu);
    auto ds = make_dataset(std::move(times), std::move(states), std::nullopt, {"x", param_name});
    ds.meta = provenance(spec);
    ds.meta["noise"] = {{"eta", noise.eta}, {"seed", noise.seed}};
    ds.meta["augmented"] = {{param_name, mu}};
    if (!warn.is_null()) ds.meta["warning"] = warn;
    return ds;
}

// ---- augmentation ---------------------------------------------------------

namespace detail {

inline TimeSeriesDataset append_column(TimeSeriesDataset ds, const std::string& name, const Eigen::VectorXd& values,
                                       const Eigen::VectorXd* derivative) {
    for (const auto& s : ds.state_names)
        if (s == name) throw ContractViolation("augment: state '" + name + "' already exists");
    const Eigen::Index m = ds.rows(), n = ds.n_states();
    Eigen::MatrixXd states(m, n + 1);
    states << ds.states, values;
    ds.states = std::move(states);
    if (ds.derivatives) {
        Eigen::MatrixXd d(m, n + 1);
        d << *ds.derivatives, *derivative;
        ds.derivatives = std::move(d);
    }
    ds.state_names.push_back(name);
    ds.validate();
    return ds;
}

}  // namespace detail

/// Appends a constant parameter column (derivative 0).
inline TimeSeriesDataset augment(TimeSeriesDataset ds, const std::string& name, double value) {
    const Eigen::VectorXd col = Eigen::VectorXd::Constant(ds.rows(), value);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(ds.rows());
    ds.meta["augmented"][name] = value;
    return detail::append_column(std::move(ds), name, col, &zero);
}

/// Appends the time stamps as a state with derivative 1.
inline TimeSeriesDataset augment_time(TimeSeriesDataset ds, const std::string& name = "t") {
    const Eigen::VectorXd col = ds.times;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ds.rows());
    ds.meta["augmented"][name] = "time";
    return detail::append_column(std::move(ds), name, col, &ones);
}

/// Appends known forcing samples u(t). Its derivative is taken from
/// `forcing_rate` when given, else estimated by central differences.
inline TimeSeriesDataset augment_forcing(TimeSeriesDataset ds, const std::string& name, const Eigen::VectorXd& forcing,
                                         std::optional<Eigen::VectorXd> forcing_rate = std::nullopt) {
    detail::require(forcing.size() == ds.rows(), "augment_forcing: sample count mismatch");
    Eigen::VectorXd rate;
    if (ds.derivatives) {
        if (forcing_rate) {
            detail::require(forcing_rate->size() == ds.rows(), "augment_forcing: rate sample count mismatch");
            rate = *forcing_rate;
        } else {
            rate.resize(ds.rows());
            for (std::size_t s = 0; s < ds.segment_count(); ++s) {
                auto [b, e] = ds.segment_range(s);
                rate.segment(b, e - b) =
                    central_difference(ds.times.segment(b, e - b), forcing.segment(b, e - b)).col(0);
            }
        }
    }
    ds.meta["augmented"][name] = "forcing";
    const Eigen::VectorXd* rate_ptr = ds.derivatives ? &rate : nullptr;
    return detail::append_column(std::move(ds), name, forcing, rate_ptr);
}

// ---- mean-field surrogate -------------------------------------------------

/// Simulates the three-state mean-field model from every initial condition
/// and stacks the runs as segments.
inline TimeSeriesDataset mean_field_surrogate(const std::map<std::string, double>& params,
                                              const std::vector<Eigen::VectorXd>& initial_conditions, double t1,
                                              double dt, const IntegratorConfig& integ = {}) {
    detail::require(!initial_conditions.empty(), "mean_field_surrogate needs at least one initial condition");
    std::vector<TimeSeriesDataset> runs;
    for (const auto& x0 : initial_conditions) {
        SystemSpec spec = SystemSpec::make(SystemKind::MeanField3D, 0.0, t1, dt);
        for (const auto& [k, v] : params) spec.params[k] = v;
        spec.x0 = x0;
        runs.push_back(simulate(spec, integ));
    }
    auto ds = concatenate(runs);
    ds.meta["system"] = "MeanField3D";
    return ds;
}

}  // namespace sindykit
