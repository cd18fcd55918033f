#pragma once

// Sampling oracles shared by the unit tests and the acceptance runner.

#include "drcc/risk.hpp"
#include "drcc/types.hpp"

#include <cmath>
#include <random>
#include <string_view>
#include <vector>

namespace drcc::testing {

/// Position distributions with a prescribed mean and covariance L L^T.
enum class Family { Gaussian, UniformEllipsoid, TwoAtom, Rademacher, Spike };

inline std::string_view family_name(Family f) {
    switch (f) {
        case Family::Gaussian: return "gaussian";
        case Family::UniformEllipsoid: return "uniform-ellipsoid";
        case Family::TwoAtom: return "two-atom";
        case Family::Rademacher: return "rademacher";
        case Family::Spike: return "spike";
    }
    return "?";
}

/// `l` is a square root of the covariance (l l^T = Sigma). TwoAtom needs a
/// rank-one covariance and uses only the first column of `l`. Spike puts
/// mass 1 - p at the mean and p on +/- sqrt(3/p) l e_i, which is the shape
/// that makes the moment bound tight at epsilon = p.
inline std::vector<Vec3> sample_family(Family f, const Vec3& mu, const Mat3& l, int n, Rng& rng, double p = 0.05) {
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(n));
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> axis(0, 2);
    for (int i = 0; i < n; ++i) {
        Vec3 z;
        switch (f) {
            case Family::Gaussian: z = Vec3(nd(rng), nd(rng), nd(rng)); break;
            case Family::UniformEllipsoid: {
                // uniform in the unit ball has covariance I/5
                Vec3 g(nd(rng), nd(rng), nd(rng));
                z = std::sqrt(5.0) * std::cbrt(uni(rng)) * g.normalized();
                break;
            }
            case Family::TwoAtom: z = Vec3((coin(rng) ? 1.0 : -1.0), 0.0, 0.0); break;
            case Family::Rademacher:
                z = Vec3(coin(rng) ? 1.0 : -1.0, coin(rng) ? 1.0 : -1.0, coin(rng) ? 1.0 : -1.0);
                break;
            case Family::Spike:
                z.setZero();
                if (uni(rng) < p) z(axis(rng)) = (coin(rng) ? 1.0 : -1.0) * std::sqrt(3.0 / p);
                break;
        }
        out.push_back(mu + l * z);
    }
    return out;
}

/// Standard error of the worst-tail-mean CVaR estimator:
/// sd(max(X - VaR, 0)) / (eps sqrt(N)).
inline double cvar_standard_error(const std::vector<double>& x, double eps) {
    const double var = empirical_var(x, eps);
    double m = 0.0, m2 = 0.0;
    for (double v : x) {
        const double e = std::max(v - var, 0.0);
        m += e;
        m2 += e * e;
    }
    const auto n = static_cast<double>(x.size());
    m /= n;
    const double sd = std::sqrt(std::max(m2 / n - m * m, 0.0));
    return sd / (eps * std::sqrt(n));
}

struct DominanceCase {
    Family family;
    double epsilon;
    double empirical_cvar;
    double bound;
    double standard_error;

    bool holds() const { return empirical_cvar <= bound + 3.0 * standard_error; }
};

/// Empirical CVaR of the safety cost under `family` vs the closed-form
/// moment bound, with n samples.
inline DominanceCase dominance_case(Family f, double eps, const SafeEllipsoid& ell, const Vec3& mu, const Mat3& l,
                                    int n, Rng& rng) {
    const auto pts = sample_family(f, mu, l, n, rng, eps);
    std::vector<double> cost;
    cost.reserve(pts.size());
    for (const auto& r : pts) cost.push_back(safety_cost(r, ell));
    const Mat3 sigma = f == Family::TwoAtom ? Mat3(l.col(0) * l.col(0).transpose()) : Mat3(l * l.transpose());
    return {f, eps, empirical_cvar(cost, eps), dr_cvar_value(sigma, ell, eps), cvar_standard_error(cost, eps)};
}

/// Random safety-cost sample sets for the sufficiency chain: mixtures of a
/// bulk and a tail, shifted so that every branch of the chain is exercised.
inline std::vector<double> random_cost_set(Rng& rng, double eps) {
    std::uniform_int_distribution<int> size(static_cast<int>(std::ceil(1.0 / eps)), 400);
    std::uniform_real_distribution<double> shift(-2.0, 0.5), tail_frac(0.0, 3.0 * eps), scale(0.05, 2.0);
    std::normal_distribution<double> nd;
    const int n = size(rng);
    const double s = shift(rng), tf = tail_frac(rng), sc = scale(rng);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> x;
    for (int i = 0; i < n; ++i) {
        double v = s + sc * nd(rng);
        if (uni(rng) < tf) v += 2.0 + std::abs(nd(rng));
        x.push_back(v);
    }
    // Re-centre so the tail mean straddles zero and both premises get exercised.
    const double offset = empirical_cvar(x, eps) + sc * (uni(rng) - 0.5);
    for (double& v : x) v -= offset;
    return x;
}

struct ChainTally {
    int sets = 0;
    int cvar_nonpositive = 0;
    int var_nonpositive = 0;
    int counterexamples = 0;
};

inline ChainTally sufficiency_chain(Rng& rng, int sets, double eps) {
    ChainTally t;
    for (int i = 0; i < sets; ++i) {
        const auto x = random_cost_set(rng, eps);
        const double cv = empirical_cvar(x, eps), va = empirical_var(x, eps);
        std::size_t viol = 0;
        for (double v : x) viol += v > 0.0 ? 1 : 0;
        const double frac = static_cast<double>(viol) / static_cast<double>(x.size());
        ++t.sets;
        if (cv <= 0.0) {
            ++t.cvar_nonpositive;
            if (!(va <= 0.0)) ++t.counterexamples;
        }
        if (va <= 0.0) {
            ++t.var_nonpositive;
            if (!(frac <= eps)) ++t.counterexamples;
        }
    }
    return t;
}

}  // namespace drcc::testing
