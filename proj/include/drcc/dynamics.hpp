#pragma once

// Two-body + atmospheric drag dynamics in the ECI frame, RK4 integration and
// zero-order-hold trajectory rollout for the satellite and the debris.
//
// Units: km, km/s, km/s^2, s. Drag inputs use SI (A in m^2, rho in kg/m^3,
// mass in kg); see drag_acceleration for the conversion.

#include "drcc/types.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcc {

/// Position/velocity of one object in ECI. Rejects non-finite components and
/// states at the geocentric singularity.
class StateVector {
public:
    explicit StateVector(const Vec6& x) : x_(x) { validate(); }
    StateVector(const Vec3& r, const Vec3& v) {
        x_ << r, v;
        validate();
    }

    Vec3 r() const { return x_.head<3>(); }
    Vec3 v() const { return x_.tail<3>(); }
    const Vec6& vec() const { return x_; }

    bool operator==(const StateVector& o) const { return x_ == o.x_; }

private:
    void validate() const {
        if (!x_.allFinite()) throw NumericError("state vector has non-finite components");
        if (!(x_.head<3>().norm() > 0.0)) throw std::domain_error("state vector at r = 0");
    }

    Vec6 x_;
};

struct BodyParams {
    double mass_kg = 300.0;
    double drag_area_m2 = 1.0;
    double drag_coeff = 2.2;

    void validate() const {
        if (!(mass_kg > 0.0)) throw std::domain_error("body mass must be > 0");
        if (!(drag_area_m2 >= 0.0)) throw std::domain_error("drag area must be >= 0");
        if (!(drag_coeff >= 0.0)) throw std::domain_error("drag coefficient must be >= 0");
    }
};

struct EnvironmentParams {
    double mu_earth = 398600.4418;           // km^3/s^2
    Vec3 omega_earth{0.0, 0.0, 7.2921159e-5};  // rad/s
    double rho0 = 1.225;                     // kg/m^3 at r0
    double r0 = 6378.1363;                   // km
    // Decay length of the exponential atmosphere, km. Setting it equal to r0
    // gives rho0 * exp(-(r - r0) / r0).
    double scale_height = 8.5;

    void validate() const {
        if (!(mu_earth > 0.0)) throw std::domain_error("mu_earth must be > 0");
        if (!omega_earth.allFinite()) throw std::domain_error("omega_earth must be finite");
        if (!(rho0 >= 0.0)) throw std::domain_error("rho0 must be >= 0");
        if (!(r0 > 0.0)) throw std::domain_error("r0 must be > 0");
        if (!(scale_height > 0.0)) throw std::domain_error("scale_height must be > 0");
    }
};

struct SimConfig {
    double dt = 0.01;              // integration step, s
    double control_period = 1.0;   // zero-order-hold period, s
    EnvironmentParams env;

    int substeps() const {
        if (!(dt > 0.0) || !(control_period > 0.0))
            throw std::domain_error("dt and control_period must be > 0");
        const double n = control_period / dt;
        const double rounded = std::round(n);
        if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
            throw std::domain_error("dt must divide control_period");
        return static_cast<int>(rounded);
    }
};

/// Additive white disturbance on the debris state derivative. `sqrt_q` is a
/// symmetric square root of Q, precomputed once.
class ProcessNoise {
public:
    ProcessNoise() : q_(Mat6::Zero()), sqrt_q_(Mat6::Zero()) {}
    explicit ProcessNoise(const Mat6& q) : q_(0.5 * (q + q.transpose())) {
        if (!is_symmetric_psd<6>(q)) throw std::domain_error("process noise Q must be symmetric PSD");
        sqrt_q_ = psd_sqrt<6>(q_);
        zero_ = q_.isZero(0.0);
    }

    const Mat6& q() const { return q_; }
    const Mat6& sqrt_q() const { return sqrt_q_; }
    bool is_zero() const { return zero_; }

private:
    Mat6 q_;
    Mat6 sqrt_q_;
    bool zero_ = true;
};

inline double atmosphere_density(double r, const EnvironmentParams& env) {
    if (!std::isfinite(r) || !(r > 0.0)) throw std::domain_error("atmosphere_density: radius must be finite and > 0");
    return env.rho0 * std::exp(-(r - env.r0) / env.scale_height);
}

namespace detail {

// Drag on raw components. rho [kg/m^3] * A/m [m^2/kg] gives 1/m; with v0 in
// km/s, 0.5 * rho * (A Cd / m) * |v0| v0 is in (1/m)(km/s)^2 = 1e6 m/s^2 per
// unit = 1e3 km/s^2 per unit. Hence the factor 1e3.
inline Vec3 drag_acceleration(const Vec3& r, const Vec3& v, const BodyParams& body,
                              const EnvironmentParams& env) {
    if (body.drag_area_m2 == 0.0 || body.drag_coeff == 0.0 || env.rho0 == 0.0) return Vec3::Zero();
    const Vec3 v0 = v - env.omega_earth.cross(r);
    const double rho = atmosphere_density(r.norm(), env);
    const double k = 0.5 * rho * body.drag_area_m2 * body.drag_coeff / body.mass_kg * 1e3;
    return -k * v0.norm() * v0;
}

inline Vec6 gravity_drag_derivative(const Vec6& x, const BodyParams& body, const EnvironmentParams& env) {
    // Scalar form of -mu r / |r|^3 + a_drag; this is the innermost loop of
    // every rollout.
    const double rx = x(0), ry = x(1), rz = x(2);
    const double vx = x(3), vy = x(4), vz = x(5);
    const double r2 = rx * rx + ry * ry + rz * rz;
    const double rn = std::sqrt(r2);
    if (!(rn > 0.0) || !std::isfinite(rn)) throw std::domain_error("dynamics evaluated at singular radius");
    const double g = -env.mu_earth / (r2 * rn);
    Vec6 dx;
    dx(0) = vx;
    dx(1) = vy;
    dx(2) = vz;
    dx(3) = g * rx;
    dx(4) = g * ry;
    dx(5) = g * rz;
    if (body.drag_area_m2 != 0.0 && body.drag_coeff != 0.0 && env.rho0 != 0.0) {
        const Vec3& w = env.omega_earth;
        const double ux = vx - (w(1) * rz - w(2) * ry);
        const double uy = vy - (w(2) * rx - w(0) * rz);
        const double uz = vz - (w(0) * ry - w(1) * rx);
        const double rho = env.rho0 * std::exp(-(rn - env.r0) / env.scale_height);
        // same 1e3 conversion as drag_acceleration
        const double k = -0.5e3 * rho * body.drag_area_m2 * body.drag_coeff / body.mass_kg *
                         std::sqrt(ux * ux + uy * uy + uz * uz);
        dx(3) += k * ux;
        dx(4) += k * uy;
        dx(5) += k * uz;
    }
    return dx;
}

}  // namespace detail

inline Vec3 drag_acceleration(const StateVector& x, const BodyParams& body, const EnvironmentParams& env) {
    return detail::drag_acceleration(x.r(), x.v(), body, env);
}

/// x_dot = [v; -mu r / |r|^3 + a_drag + u]
inline Vec6 satellite_derivative(const Vec6& x, const Vec3& u, const BodyParams& body,
                                 const EnvironmentParams& env) {
    Vec6 dx = detail::gravity_drag_derivative(x, body, env);
    dx.tail<3>() += u;
    return dx;
}

/// Same as the satellite without control, plus a 6-dim additive disturbance.
inline Vec6 debris_derivative(const Vec6& x, const Vec6& w, const BodyParams& body,
                              const EnvironmentParams& env) {
    return detail::gravity_drag_derivative(x, body, env) + w;
}

/// Classical four-stage Runge-Kutta step.
template <class Deriv, class State>
State rk4_step(Deriv&& f, const State& x, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::domain_error("rk4_step: dt must be finite and > 0");
    const State k1 = f(x);
    const State k2 = f(State(x + 0.5 * dt * k1));
    const State k3 = f(State(x + 0.5 * dt * k2));
    const State k4 = f(State(x + dt * k3));
    State out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!out.allFinite()) throw NumericError("rk4_step produced a non-finite state");
    return out;
}

namespace detail {

struct NoVisit {
    void operator()(const Vec6&) const {}
};

inline void check_radius(const Vec6& x, std::size_t step) {
    if (!(x.head<3>().norm() > 0.0) || !x.allFinite())
        throw NumericError("propagated state became invalid at control step " + std::to_string(step));
}

}  // namespace detail

/// One zero-order-hold control period for the satellite. `visit` sees every
/// fine-grid state after each substep.
template <class Visit = detail::NoVisit>
Vec6 advance_satellite(const Vec6& x0, const Vec3& u, const BodyParams& body, const SimConfig& sim,
                       Visit&& visit = {}) {
    const int n = sim.substeps();
    const auto f = [&](const Vec6& x) { return satellite_derivative(x, u, body, sim.env); };
    Vec6 x = x0;
    for (int i = 0; i < n; ++i) {
        x = rk4_step(f, x, sim.dt);
        visit(x);
    }
    return x;
}

/// One control period of the debris. Noise is Euler-Maruyama: after every RK4
/// substep add w*dt with w ~ N(0, Q/dt), i.e. sqrt(dt) * sqrt(Q) * z.
template <class Visit = detail::NoVisit>
Vec6 advance_debris(const Vec6& x0, const BodyParams& body, const ProcessNoise& noise, const SimConfig& sim,
                    Rng* rng, Visit&& visit = {}) {
    const int n = sim.substeps();
    const Vec6 w0 = Vec6::Zero();
    const auto f = [&](const Vec6& x) { return debris_derivative(x, w0, body, sim.env); };
    const bool noisy = rng != nullptr && !noise.is_zero();
    const double sdt = std::sqrt(sim.dt);
    Vec6 x = x0;
    for (int i = 0; i < n; ++i) {
        x = rk4_step(f, x, sim.dt);
        if (noisy) x += sdt * (noise.sqrt_q() * standard_normal<6>(*rng));
        visit(x);
    }
    return x;
}

/// Thrust sequence, one row per control period (K x 3), km/s^2.
using ControlSequence = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// K+1 states sampled at control-period boundaries.
inline std::vector<StateVector> propagate_satellite(const StateVector& x0, const ControlSequence& controls,
                                                    const BodyParams& body, const SimConfig& sim) {
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(controls.rows()) + 1);
    out.push_back(x0);
    Vec6 x = x0.vec();
    for (Eigen::Index k = 0; k < controls.rows(); ++k) {
        x = advance_satellite(x, Vec3(controls.row(k).transpose()), body, sim);
        detail::check_radius(x, static_cast<std::size_t>(k + 1));
        out.emplace_back(x);
    }
    return out;
}

/// K+1 debris states at control-period boundaries. With Q = 0 the rollout is
/// deterministic and `rng` is never touched.
inline std::vector<StateVector> propagate_debris(const StateVector& x0, int steps, const BodyParams& body,
                                                 const ProcessNoise& noise, const SimConfig& sim, Rng& rng) {
    if (steps < 0) throw std::domain_error("propagate_debris: negative step count");
    std::vector<StateVector> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    out.push_back(x0);
    Vec6 x = x0.vec();
    for (int k = 0; k < steps; ++k) {
        x = advance_debris(x, body, noise, sim, &rng);
        detail::check_radius(x, static_cast<std::size_t>(k + 1));
        out.emplace_back(x);
    }
    return out;
}

inline double specific_energy(const Vec6& x, double mu) {
    return 0.5 * x.tail<3>().squaredNorm() - mu / x.head<3>().norm();
}

inline double angular_momentum(const Vec6& x) { return x.head<3>().cross(x.tail<3>()).norm(); }

}  // namespace drcc
