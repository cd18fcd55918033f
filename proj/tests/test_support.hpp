#pragma once

#include "drcc/mpc.hpp"

#include <cmath>
#include <random>

namespace drcc::testing {

inline EnvironmentParams drag_free_env() {
    EnvironmentParams env;
    env.rho0 = 0.0;
    return env;
}

inline SimConfig sim_with(double dt, double period, EnvironmentParams env = {}) {
    SimConfig s;
    s.dt = dt;
    s.control_period = period;
    s.env = env;
    return s;
}

/// Circular equatorial orbit of radius r (km).
inline Vec6 circular_state(double r, double mu = 398600.4418) {
    Vec6 x;
    x << r, 0.0, 0.0, 0.0, std::sqrt(mu / r), 0.0;
    return x;
}

inline Mat6 random_psd(Rng& rng, double scale = 1.0) {
    Mat6 a;
    std::normal_distribution<double> nd;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = nd(rng);
    return scale * a * a.transpose() / 6.0;
}

inline Mat3 random_psd3(Rng& rng, double scale = 1.0) {
    Mat3 a;
    std::normal_distribution<double> nd;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = nd(rng);
    return scale * a * a.transpose() / 3.0;
}

/// x+ = F x + c (+ noise with covariance Qd). The exact Gaussian answer is
/// m+ = F m + c, P+ = F P F^T + Qd.
struct AffineModel {
    Mat6 f = Mat6::Identity();
    Vec6 c = Vec6::Zero();
    Mat6 qd = Mat6::Zero();
    Mat6 sqrt_qd = Mat6::Zero();

    AffineModel() = default;
    AffineModel(const Mat6& f_, const Vec6& c_, const Mat6& qd_) : f(f_), c(c_), qd(qd_), sqrt_qd(psd_sqrt<6>(qd_)) {}

    Vec6 advance(const Vec6& x) const { return f * x + c; }
    Vec6 advance_noisy(const Vec6& x, Rng& rng) const { return advance(x) + sqrt_qd * standard_normal<6>(rng); }
    Mat6 discrete_noise() const { return qd; }
};
static_assert(DebrisModel<AffineModel>);

inline double rel_frobenius(const Mat6& a, const Mat6& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

/// The default conjunction advanced `lead` seconds along the noise-free
/// flyby, with a short episode and a small CEM budget. Cheap enough for unit
/// tests while still forcing an avoidance manoeuvre.
inline Scenario near_tca_scenario(double lead = 11.0) {
    Scenario sc;
    const SimConfig& sim = sc.sim;
    const int steps = static_cast<int>(std::lround(lead / sim.control_period));
    Vec6 s = defaults::satellite_state(), d = defaults::debris_mean_state();
    for (int k = 0; k < steps; ++k) {
        s = advance_satellite(s, Vec3::Zero(), sc.satellite_body, sim);
        d = advance_debris(d, sc.debris_body, ProcessNoise{}, sim, nullptr);
    }
    sc.satellite_x0 = StateVector(s);
    sc.debris_belief0 = StateBelief(d, defaults::debris_covariance());
    sc.sim_duration = 8.0;
    sc.horizon = 5;
    sc.propagator.mc_samples = 20;
    sc.cem.population = 30;
    sc.cem.elite_count = 6;
    sc.cem.max_iterations = 4;
    return sc;
}

/// Debris parked 1000 km away along the satellite's radius.
inline Scenario far_apart_scenario() {
    Scenario sc;
    const Vec6 s = defaults::satellite_state();
    const double r = s.head<3>().norm();
    Vec6 d;
    d << s.head<3>() * (r + 1000.0) / r, s.tail<3>() * std::sqrt(r / (r + 1000.0));
    sc.debris_belief0 = StateBelief(d, defaults::debris_covariance());
    sc.noise = ProcessNoise{};
    sc.sim_duration = 5.0;
    return sc;
}

}  // namespace drcc::testing
