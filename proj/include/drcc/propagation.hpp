#pragma once

// Debris moment propagation: linearized Gaussian, unscented transform and
// Monte Carlo. Each produces the per-step mean/covariance of the debris
// position for k = 1..K that the risk constraint consumes.

#include "drcc/dynamics.hpp"
#include "drcc/parallel.hpp"
#include "drcc/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drcc {

/// Mean and covariance of an N-dimensional distribution. The covariance is
/// symmetrized on construction and must be PSD within round-off.
template <int N>
struct GaussianBelief {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;

    Vec mean;
    Mat cov;

    GaussianBelief(const Vec& m, const Mat& c) : mean(m), cov(0.5 * (c + c.transpose())) {
        if (!mean.allFinite()) throw NumericError("belief mean is not finite");
        if (!is_symmetric_psd<N>(c)) throw NumericError("belief covariance is not symmetric PSD");
    }
};

using StateBelief = GaussianBelief<6>;
using PositionBelief = GaussianBelief<3>;

inline PositionBelief extract_position_belief(const StateBelief& b) {
    return PositionBelief(b.mean.head<3>(), b.cov.topLeftCorner<3, 3>());
}

/// Per-step beliefs for k = 1..K. `states[k-1]` is the full 6-dim belief,
/// `positions[k-1]` its position block.
struct MomentTrajectory {
    std::vector<StateBelief> states;
    std::vector<PositionBelief> positions;

    std::size_t size() const { return positions.size(); }

    void push(const StateBelief& b) {
        states.push_back(b);
        positions.push_back(extract_position_belief(b));
    }
};

enum class PropagatorKind { LinearGaussian, Unscented, MonteCarlo };

inline std::string_view to_string(PropagatorKind k) {
    switch (k) {
        case PropagatorKind::LinearGaussian: return "linear";
        case PropagatorKind::Unscented: return "ut";
        case PropagatorKind::MonteCarlo: return "mc";
    }
    return "?";
}

inline PropagatorKind parse_propagator(std::string_view s) {
    if (s == "linear") return PropagatorKind::LinearGaussian;
    if (s == "ut") return PropagatorKind::Unscented;
    if (s == "mc") return PropagatorKind::MonteCarlo;
    throw std::invalid_argument("unknown propagator '" + std::string(s) + "' (expected linear|ut|mc)");
}

struct PropagatorConfig {
    PropagatorKind kind = PropagatorKind::MonteCarlo;
    int mc_samples = 50;

    void validate() const {
        if (kind == PropagatorKind::MonteCarlo && mc_samples < 2)
            throw std::domain_error("Monte Carlo needs at least 2 samples");
    }
};

/// A debris model exposes the noise-free one-control-period map, the same map
/// with process noise drawn from `rng`, and the per-period noise covariance
/// used by the moment propagators.
template <class M>
concept DebrisModel = requires(const M& m, const Vec6& x, Rng& rng) {
    { m.advance(x) } -> std::convertible_to<Vec6>;
    { m.advance_noisy(x, rng) } -> std::convertible_to<Vec6>;
    { m.discrete_noise() } -> std::convertible_to<Mat6>;
};

struct OrbitalDebrisModel {
    BodyParams body;
    ProcessNoise noise;
    SimConfig sim;

    Vec6 advance(const Vec6& x) const { return advance_debris(x, body, noise, sim, nullptr); }
    Vec6 advance_noisy(const Vec6& x, Rng& rng) const { return advance_debris(x, body, noise, sim, &rng); }
    // Euler approximation Q * T of the discretized white-noise covariance.
    Mat6 discrete_noise() const { return noise.q() * sim.control_period; }
};

static_assert(DebrisModel<OrbitalDebrisModel>);

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

/// Central-difference Jacobian of a map R^6 -> R^6.
template <class Map>
Mat6 numerical_jacobian(Map&& f, const Vec6& x, const Vec6& h) {
    if (!(h.array() > 0.0).all()) throw std::domain_error("numerical_jacobian: steps must be > 0");
    Mat6 jac;
    for (int i = 0; i < 6; ++i) {
        Vec6 xp = x, xm = x;
        xp(i) += h(i);
        xm(i) -= h(i);
        jac.col(i) = (Vec6(f(xp)) - Vec6(f(xm))) / (2.0 * h(i));
    }
    if (!jac.allFinite()) throw NumericError("numerical_jacobian produced non-finite entries");
    return jac;
}

/// Step sizes h_i = cbrt(machine eps) * max(|x_i|, 1), balancing truncation
/// against cancellation in the central difference.
inline Vec6 default_jacobian_steps(const Vec6& x) {
    const double h = std::cbrt(std::numeric_limits<double>::epsilon());
    return h * x.cwiseAbs().cwiseMax(1.0);
}

template <class Map>
Mat6 numerical_jacobian(Map&& f, const Vec6& x) {
    return numerical_jacobian(std::forward<Map>(f), x, default_jacobian_steps(x));
}

namespace detail {

inline StateBelief checked_belief(const Vec6& mean, const Mat6& cov) {
    try {
        return StateBelief(mean, cov);
    } catch (const NumericError&) {
        throw NumericError("propagated covariance lost positive semidefiniteness");
    }
}

}  // namespace detail

/// Mean from the noise-free rollout of the initial mean; covariance from
/// P+ = A P A^T + Q T with A re-linearized about the nominal state every
/// control period.
template <DebrisModel M>
MomentTrajectory linear_propagate(const M& model, const StateBelief& belief0, int steps) {
    MomentTrajectory out;
    Vec6 mean = belief0.mean;
    Mat6 cov = belief0.cov;
    const Mat6 qd = model.discrete_noise();
    const auto map = [&](const Vec6& x) { return model.advance(x); };
    for (int k = 0; k < steps; ++k) {
        const Mat6 a = numerical_jacobian(map, mean);
        mean = model.advance(mean);
        cov = a * cov * a.transpose() + qd;
        cov = 0.5 * (cov + cov.transpose());
        out.push(detail::checked_belief(mean, cov));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Unscented transform
// ---------------------------------------------------------------------------

inline constexpr int kStateDim = 6;
inline constexpr int kSigmaCount = 2 * kStateDim + 1;

using SigmaPoints = std::array<Vec6, kSigmaCount>;

/// Lower Cholesky factor of m. On failure adds 1e-12 * trace(m)/n * I (or
/// 1e-12 * I when the trace is zero) and retries, doubling up to 3 times.
inline Mat6 cholesky_with_jitter(const Mat6& m) {
    const Mat6 sym = 0.5 * (m + m.transpose());
    Eigen::LLT<Mat6> llt(sym);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite())
        return llt.matrixL();
    const double tr = sym.trace();
    double jitter = 1e-12 * (tr > 0.0 ? tr / kStateDim : 1.0);
    for (int attempt = 0; attempt < 4; ++attempt, jitter *= 2.0) {
        llt.compute(sym + jitter * Mat6::Identity());
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericError("Cholesky factorization failed after jitter");
}

/// s_0 = mean, s_i = mean +/- column i of L with L L^T = n P.
inline SigmaPoints sigma_points(const StateBelief& belief) {
    // chol(0) = 0 exactly; jitter is only for near-singular inputs.
    const Mat6 l = belief.cov.isZero(0.0) ? Mat6::Zero()
                                          : cholesky_with_jitter(static_cast<double>(kStateDim) * belief.cov);
    SigmaPoints pts;
    pts[0] = belief.mean;
    for (int i = 0; i < kStateDim; ++i) {
        pts[1 + i] = belief.mean + l.col(i);
        pts[1 + kStateDim + i] = belief.mean - l.col(i);
    }
    return pts;
}

/// Uniform-weight sample mean and 1/(N-1) covariance. For the 13 sigma points
/// this is exactly the 1/(2n+1), 1/(2n) weighting.
inline StateBelief sample_moments(std::span<const Vec6> pts) {
    if (pts.size() < 2) throw std::domain_error("sample_moments needs at least 2 points");
    Vec6 mean = Vec6::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Mat6 cov = Mat6::Zero();
    for (const auto& p : pts) {
        const Vec6 d = p - mean;
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(pts.size() - 1);
    return detail::checked_belief(mean, 0.5 * (cov + cov.transpose()));
}

/// Unscented prediction, one control period at a time: draw sigma points from
/// the current belief, push them through the noise-free map, re-estimate the
/// moments about the sigma-point mean, then add Q T.
template <DebrisModel M>
MomentTrajectory ut_propagate(const M& model, const StateBelief& belief0, int steps) {
    MomentTrajectory out;
    StateBelief current = belief0;
    const Mat6 qd = model.discrete_noise();
    for (int k = 0; k < steps; ++k) {
        SigmaPoints pts = sigma_points(current);
        parallel_for(pts.size(), [&](std::size_t i) { pts[i] = model.advance(pts[i]); });
        const StateBelief b = sample_moments(pts);
        current = detail::checked_belief(b.mean, b.cov + qd);
        out.push(current);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// N initial states from N(mean, P0), each rolled out with its own noise
/// stream derived from (seed, sample index); unbiased sample moments per step.
template <DebrisModel M>
MomentTrajectory mc_propagate(const M& model, const StateBelief& belief0, int samples, int steps,
                              std::uint64_t seed) {
    if (samples < 2) throw std::domain_error("mc_propagate: need at least 2 samples");
    const auto n = static_cast<std::size_t>(samples);
    const auto kk = static_cast<std::size_t>(std::max(steps, 0));
    const Mat6 s0 = psd_sqrt<6>(belief0.cov);
    std::vector<Vec6> traj(n * kk);
    parallel_for(n, [&](std::size_t i) {
        Rng rng = make_rng(derive_seed(seed, i));
        Vec6 x = belief0.mean + s0 * standard_normal<6>(rng);
        for (std::size_t k = 0; k < kk; ++k) {
            x = model.advance_noisy(x, rng);
            traj[k * n + i] = x;
        }
    });
    MomentTrajectory out;
    for (std::size_t k = 0; k < kk; ++k)
        out.push(sample_moments(std::span<const Vec6>(traj.data() + k * n, n)));
    return out;
}

template <DebrisModel M>
MomentTrajectory propagate_moments(const PropagatorConfig& cfg, const M& model, const StateBelief& belief0,
                                   int steps, std::uint64_t seed) {
    switch (cfg.kind) {
        case PropagatorKind::LinearGaussian: return linear_propagate(model, belief0, steps);
        case PropagatorKind::Unscented: return ut_propagate(model, belief0, steps);
        case PropagatorKind::MonteCarlo: return mc_propagate(model, belief0, cfg.mc_samples, steps, seed);
    }
    throw std::logic_error("unhandled propagator kind");
}

}  // namespace drcc
