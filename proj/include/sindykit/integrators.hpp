#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sindykit/errors.hpp"

namespace sindykit {

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

enum class IntegratorMethod { RK4Fixed, RK45Adaptive };

inline const char* to_string(IntegratorMethod m) {
    return m == IntegratorMethod::RK4Fixed ? "RK4Fixed" : "RK45Adaptive";
}

inline IntegratorMethod integrator_method_from_string(const std::string& s) {
    if (s == "RK4Fixed") return IntegratorMethod::RK4Fixed;
    if (s == "RK45Adaptive") return IntegratorMethod::RK45Adaptive;
    throw ConfigError("unknown integrator '" + s + "'");
}

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::RK4Fixed;
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    bool record_step_size = false;
    /// States whose infinity norm exceeds this are treated as a blow-up.
    double divergence_bound = 1e8;

    void validate() const {
        detail::require(abs_tol > 0.0 && rel_tol > 0.0, "integrator tolerances must be > 0");
    }
};

/// Trajectory sampled on a uniform output grid.
struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;
    /// Step size the adaptive controller proposed when reaching each sample
    /// (fixed step for RK4). Empty unless requested.
    Eigen::VectorXd step_sizes;
};

inline Eigen::VectorXd rk4_step(const Rhs& f, double t, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Dormand-Prince 5(4) with a standard PI-free step controller.
class DormandPrince {
public:
    DormandPrince(Rhs f, double abs_tol, double rel_tol) : f_(std::move(f)), atol_(abs_tol), rtol_(rel_tol) {}

    /// Advances x from t to t_end. `h` carries the step proposal between
    /// calls. Throws NumericalError if the step size underflows.
    void advance(double& t, Eigen::VectorXd& x, double t_end, double& h) const {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                                b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        while (t < t_end) {
            const double remaining = t_end - t;
            const bool last = h >= remaining;
            const double step = last ? remaining : h;
            if (step < 1e-14 * std::max(1.0, std::abs(t))) {
                std::ostringstream os;
                os << "adaptive step size underflow at t = " << t;
                throw NumericalError(os.str());
            }
            const Eigen::VectorXd k1 = f_(t, x);
            const Eigen::VectorXd k2 = f_(t + c2 * step, x + step * (a21 * k1));
            const Eigen::VectorXd k3 = f_(t + c3 * step, x + step * (a31 * k1 + a32 * k2));
            const Eigen::VectorXd k4 = f_(t + c4 * step, x + step * (a41 * k1 + a42 * k2 + a43 * k3));
            const Eigen::VectorXd k5 = f_(t + c5 * step, x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const Eigen::VectorXd k6 =
                f_(t + step, x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const Eigen::VectorXd x5 = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const Eigen::VectorXd k7 = f_(t + step, x5);
            const Eigen::VectorXd err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double norm = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double sc = atol_ + rtol_ * std::max(std::abs(x[i]), std::abs(x5[i]));
                norm = std::max(norm, std::abs(err[i]) / sc);
            }
            if (!std::isfinite(norm)) norm = 1e10;
            const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
            if (norm <= 1.0) {
                t = last ? t_end : t + step;
                x = x5;
                // A step clipped to land on t_end says little about the
                // controller's preferred size; keep the previous proposal.
                if (!last || step == h) h = step * factor;
            } else {
                h = step * factor;
            }
        }
    }

private:
    Rhs f_;
    double atol_, rtol_;
};

/// Integrates x' = f(t, x) from t0 and samples at t0 + k*dt for
/// k = 0..count-1.
inline Trajectory integrate(const Rhs& f, const Eigen::VectorXd& x0, double t0, double dt, Eigen::Index count,
                            const IntegratorConfig& cfg) {
    cfg.validate();
    detail::require(dt > 0.0, "integration output step must be > 0");
    detail::require(count >= 1, "integration needs at least one sample");
    Trajectory tr;
    tr.times.resize(count);
    tr.states.resize(count, x0.size());
    if (cfg.record_step_size) tr.step_sizes.resize(count);
    Eigen::VectorXd x = x0;
    double t = t0;
    double h = dt;
    const DormandPrince dp(f, cfg.abs_tol, cfg.rel_tol);
    for (Eigen::Index k = 0; k < count; ++k) {
        const double tk = t0 + static_cast<double>(k) * dt;
        if (k > 0) {
            if (cfg.method == IntegratorMethod::RK4Fixed) {
                x = rk4_step(f, t, x, tk - t);
            } else {
                dp.advance(t, x, tk, h);
            }
            t = tk;
            if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > cfg.divergence_bound) {
                std::ostringstream os;
                os << "trajectory diverged at t = " << tk;
                throw NumericalError(os.str());
            }
        }
        tr.times[k] = tk;
        tr.states.row(k) = x.transpose();
        if (cfg.record_step_size) tr.step_sizes[k] = cfg.method == IntegratorMethod::RK4Fixed ? dt : h;
    }
    return tr;
}

/// Number of grid samples covering [t0, t1] with step dt.
inline Eigen::Index grid_count(double t0, double t1, double dt) {
    detail::require(t1 > t0, "time span must have t1 > t0");
    detail::require(dt > 0.0, "time step must be > 0");
    return static_cast<Eigen::Index>(std::llround((t1 - t0) / dt)) + 1;
}

}  // namespace sindykit
