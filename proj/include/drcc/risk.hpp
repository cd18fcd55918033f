#pragma once

// Ellipsoidal collision-free set, safety cost, the moment-robust CVaR bound
// and the discounted trajectory risk. The empirical VaR/CVaR estimators are
// validation oracles for the closed-form bound.

#include "drcc/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace drcc {

/// Risk charged to a horizon step whose free set cannot be built.
inline constexpr double kInfeasibleRisk = 1e6;
/// Smallest admissible free-set radius, km.
inline constexpr double kMinFreeRadius = 1e-6;

struct RiskParams {
    double epsilon = 0.05;  // allowed collision probability
    double d_thres = 0.1;   // collision distance, km
    double gamma = 0.95;    // trajectory-risk discount

    void validate() const {
        if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must be in (0, 1)");
        if (!(d_thres > 0.0)) throw std::domain_error("d_thres must be > 0");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::domain_error("gamma must be in (0, 1]");
    }
};

/// {r : (r - center)^T E (r - center) <= 1}, E symmetric positive definite.
struct SafeEllipsoid {
    Mat3 shape;
    Vec3 center;
};

/// Largest ball around the debris mean that stays clear of the d_thres-ball
/// around the satellite: E = I / (|r_s - mu_d| - d_thres)^2. Returns nullopt
/// when that radius would drop below kMinFreeRadius.
inline std::optional<SafeEllipsoid> build_safe_ellipsoid(const Vec3& r_sat, const Vec3& mu_debris,
                                                         double d_thres) {
    const double radius = (r_sat - mu_debris).norm() - d_thres;
    if (!(radius > kMinFreeRadius)) return std::nullopt;
    return SafeEllipsoid{Mat3::Identity() / (radius * radius), mu_debris};
}

inline double safety_cost(const Vec3& r, const SafeEllipsoid& ell) {
    const Vec3 d = r - ell.center;
    return d.dot(ell.shape * d) - 1.0;
}

/// sup over all distributions with covariance Sigma of CVaR_eps of the safety
/// cost: -1 + Tr(Sigma E) / eps. The step is safe iff the value is <= 0.
inline double dr_cvar_value(const Mat3& sigma, const SafeEllipsoid& ell, double epsilon) {
    return -1.0 + (sigma * ell.shape).trace() / epsilon;
}

/// sum_{k=1}^{K} gamma^k * risk_k
inline double trajectory_risk(std::span<const double> risks, double gamma) {
    double total = 0.0;
    double w = 1.0;
    for (double r : risks) {
        w *= gamma;
        total += w * r;
    }
    return total;
}

namespace detail {

inline std::vector<double> sorted_for_tail(std::span<const double> samples, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw std::domain_error("epsilon must be in (0, 1]");
    const auto needed = static_cast<std::size_t>(std::ceil(1.0 / epsilon - 1e-12));
    if (samples.size() < needed) throw std::domain_error("too few samples for the requested epsilon");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    return s;
}

}  // namespace detail

/// Smallest sample value g with (#samples > g) / N <= epsilon.
inline double empirical_var(std::span<const double> samples, double epsilon) {
    const auto s = detail::sorted_for_tail(samples, epsilon);
    const auto n = s.size();
    const auto allowed = static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
    return s[n - 1 - std::min(allowed, n - 1)];
}

/// Mean of the worst ceil(epsilon * N) samples.
inline double empirical_cvar(std::span<const double> samples, double epsilon) {
    const auto s = detail::sorted_for_tail(samples, epsilon);
    const auto n = s.size();
    auto m = static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(n) - 1e-9));
    m = std::clamp<std::size_t>(m, 1, n);
    return std::accumulate(s.end() - static_cast<std::ptrdiff_t>(m), s.end(), 0.0) / static_cast<double>(m);
}

}  // namespace drcc
