#pragma once

// Receding-horizon loop: propagate the debris belief, solve the constrained
// CEM problem, apply the first thrust for one control period, repeat. The
// ground-truth debris is simulated separately with its own noise stream.

#include "drcc/cem.hpp"
#include "drcc/dynamics.hpp"
#include "drcc/propagation.hpp"
#include "drcc/risk.hpp"
#include "drcc/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drcc {

/// Config q_scale is given in meter-based units (m^2/s, m^2/s^3); the
/// dynamics run in km.
inline constexpr double kQScaleToKm = 1e-6;

namespace defaults {

// Starlink-like satellite, 550 km circular, i = 53 deg. The debris is on a
// 97.5 deg circular orbit through the same point; unforced, the two pass
// 41 m apart at t = 15 s with a 6.8 km/s closing speed.
inline Vec6 satellite_state() {
    Vec6 x;
    x << 5379.675392538888, 2627.263118024976, 3486.495915809343, -4.779525658776969, 3.544568301317624,
        4.703801009143411;
    return x;
}

inline Vec6 debris_mean_state() {
    Vec6 x;
    x << 5350.303829680875, 2721.196676213269, 3459.621129012335, -2.819504403741143, -2.716048962895896,
        6.496695064095868;
    return x;
}

/// 10 m position / 1 m/s velocity one-sigma.
inline Mat6 debris_covariance() {
    Vec6 d;
    d << 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-6;
    return d.asDiagonal();
}

inline Mat6 process_noise(double q_scale = 0.05) { return q_scale * kQScaleToKm * Mat6::Identity(); }

}  // namespace defaults

struct Scenario {
    StateVector satellite_x0{defaults::satellite_state()};
    StateBelief debris_belief0{defaults::debris_mean_state(), defaults::debris_covariance()};
    BodyParams satellite_body{300.0, 1.0, 2.2};
    BodyParams debris_body{50.0, 1.0, 2.2};
    SimConfig sim;
    ProcessNoise noise{defaults::process_noise()};
    RiskParams risk;
    int horizon = 10;
    double sim_duration = 30.0;
    Mat3 control_weight = Mat3::Identity();
    ControlBounds bounds;
    PropagatorConfig propagator;
    CemParams cem;
    bool control_enabled = true;
    std::uint64_t seed = 0;

    int episode_steps() const { return static_cast<int>(std::llround(sim_duration / sim.control_period)); }

    OrbitalDebrisModel debris_model() const { return {debris_body, noise, sim}; }

    void validate() const {
        satellite_body.validate();
        debris_body.validate();
        sim.env.validate();
        (void)sim.substeps();
        risk.validate();
        bounds.validate();
        propagator.validate();
        cem.validate();
        if (horizon < 1) throw std::domain_error("horizon must be >= 1");
        if (!(sim_duration >= sim.control_period)) throw std::domain_error("sim_duration must be >= control_period");
        Eigen::LLT<Mat3> llt(0.5 * (control_weight + control_weight.transpose()));
        if (llt.info() != Eigen::Success || (control_weight - control_weight.transpose()).norm() > 1e-12)
            throw std::domain_error("control weight R must be symmetric positive definite");
    }
};

/// Rolls the satellite out under `u` and scores it against the debris
/// moments: per-step -1 + Tr(Sigma E)/eps (kInfeasibleRisk where no free set
/// exists), feasibility of every step, discounted trajectory risk and fuel.
inline CandidateEvaluation evaluate_candidate(const ControlSequence& u, const Vec6& satellite_x0,
                                              const BodyParams& satellite_body, const SimConfig& sim,
                                              const MomentTrajectory& moments, const RiskParams& risk,
                                              const Mat3& control_weight) {
    if (static_cast<std::size_t>(u.rows()) != moments.size())
        throw std::domain_error("evaluate_candidate: horizon mismatch between controls and moments");
    CandidateEvaluation ev;
    ev.step_risks.resize(moments.size());
    ev.feasible = true;
    Vec6 x = satellite_x0;
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        x = advance_satellite(x, Vec3(u.row(k).transpose()), satellite_body, sim);
        const auto& pos = moments.positions[static_cast<std::size_t>(k)];
        const auto ell = build_safe_ellipsoid(x.head<3>(), pos.mean, risk.d_thres);
        const double r = ell ? dr_cvar_value(pos.cov, *ell, risk.epsilon) : kInfeasibleRisk;
        ev.step_risks[static_cast<std::size_t>(k)] = r;
        if (!(r <= 0.0)) ev.feasible = false;
    }
    ev.trajectory_risk = trajectory_risk(ev.step_risks, risk.gamma);
    ev.fuel_cost = fuel_cost(u, control_weight);
    return ev;
}

struct MpcStepResult {
    Vec3 control = Vec3::Zero();
    ControlSequence plan;
    CandidateEvaluation plan_eval;
    MomentTrajectory moments;
    std::optional<CemResult> cem;  // empty when the zero plan was already feasible
};

/// One MPC solve. If the all-zero sequence satisfies every constraint it is
/// the exact fuel optimum and CEM is skipped; otherwise CEM starts from
/// `warm_start` (zeros when absent) with init_std spread.
inline MpcStepResult mpc_step(const Scenario& sc, const Vec6& satellite_state, const StateBelief& debris_belief,
                              const std::optional<ControlSequence>& warm_start, std::uint64_t seed,
                              int step_index = 0) {
    try {
        const int horizon = sc.horizon;
        MpcStepResult out;
        out.moments = propagate_moments(sc.propagator, sc.debris_model(), debris_belief, horizon,
                                        derive_seed(seed, 0x70726f70ULL));
        const auto evaluate = [&](const ControlSequence& u) {
            return evaluate_candidate(u, satellite_state, sc.satellite_body, sc.sim, out.moments, sc.risk,
                                      sc.control_weight);
        };

        ControlSequence zero = ControlSequence::Zero(horizon, 3);
        CandidateEvaluation zero_eval = evaluate(zero);
        if (zero_eval.feasible) {
            out.plan = std::move(zero);
            out.plan_eval = std::move(zero_eval);
            return out;
        }

        SamplingDistribution init;
        init.mean = warm_start && warm_start->rows() == horizon ? *warm_start : ControlSequence::Zero(horizon, 3);
        sc.bounds.clamp(init.mean);
        init.std = ControlSequence::Constant(horizon, 3, sc.cem.init_std);
        CemResult res = cem_solve(evaluate, init, sc.bounds, sc.cem, derive_seed(seed, 0x63656dULL));
        out.plan = res.best;
        out.plan_eval = res.best_eval;
        out.control = res.best.row(0).transpose();
        out.cem = std::move(res);
        return out;
    } catch (const NumericError& e) {
        throw NumericError("MPC step " + std::to_string(step_index) + ": " + e.what());
    }
}

/// Drop the first row and repeat the last one.
inline ControlSequence shift_plan(const ControlSequence& plan) {
    ControlSequence next(plan.rows(), 3);
    if (plan.rows() == 0) return next;
    next.topRows(plan.rows() - 1) = plan.bottomRows(plan.rows() - 1);
    next.row(plan.rows() - 1) = plan.row(plan.rows() - 1);
    return next;
}

struct EpisodeStep {
    double time = 0.0;
    Vec6 satellite = Vec6::Zero();
    Vec6 debris = Vec6::Zero();
    Vec3 control = Vec3::Zero();
    std::vector<double> risks;  // planned per-horizon risk values
    bool feasible = false;
    bool planned = false;       // false on the terminal row
};

struct EpisodeRecord {
    std::uint64_t seed = 0;
    std::vector<EpisodeStep> steps;  // one per control period plus the terminal state
    // Fine dt grid, starting at t = 0.
    std::vector<Vec3> fine_satellite_r;
    std::vector<Vec3> fine_debris_r;
    double fine_dt = 0.0;
    double min_distance = std::numeric_limits<double>::infinity();
    double total_delta_v = 0.0;
    bool collision = false;
};

namespace seeds {
inline constexpr std::uint64_t kTruthInit = 1;
inline constexpr std::uint64_t kTruthNoise = 2;
inline constexpr std::uint64_t kPlanning = 3;
}  // namespace seeds

/// Closed-loop episode. The true debris starts from a draw of the initial
/// belief and evolves with process noise; the planning belief is advanced
/// open-loop by one control period per step with the configured propagator.
inline EpisodeRecord run_episode(const Scenario& sc) {
    sc.validate();
    EpisodeRecord rec;
    rec.seed = sc.seed;
    rec.fine_dt = sc.sim.dt;

    Rng init_rng = make_rng(derive_seed(sc.seed, seeds::kTruthInit));
    Rng truth_rng = make_rng(derive_seed(sc.seed, seeds::kTruthNoise));
    Vec6 debris = sc.debris_belief0.mean + psd_sqrt<6>(sc.debris_belief0.cov) * standard_normal<6>(init_rng);
    Vec6 sat = sc.satellite_x0.vec();
    StateBelief belief = sc.debris_belief0;
    std::optional<ControlSequence> warm;

    const int n = sc.episode_steps();
    const auto record_fine = [&](const Vec3& rs, const Vec3& rd) {
        rec.fine_satellite_r.push_back(rs);
        rec.fine_debris_r.push_back(rd);
        rec.min_distance = std::min(rec.min_distance, (rs - rd).norm());
    };
    record_fine(sat.head<3>(), debris.head<3>());

    for (int i = 0; i < n; ++i) {
        EpisodeStep step;
        step.time = i * sc.sim.control_period;
        step.satellite = sat;
        step.debris = debris;
        step.planned = true;

        MpcStepResult res;
        if (sc.control_enabled) {
            res = mpc_step(sc, sat, belief, warm, derive_seed(sc.seed, seeds::kPlanning, static_cast<std::uint64_t>(i)), i);
            warm = shift_plan(res.plan);
        } else {
            res.moments = propagate_moments(sc.propagator, sc.debris_model(), belief, sc.horizon,
                                            derive_seed(sc.seed, seeds::kPlanning, static_cast<std::uint64_t>(i)));
            res.plan = ControlSequence::Zero(sc.horizon, 3);
            res.plan_eval = evaluate_candidate(res.plan, sat, sc.satellite_body, sc.sim, res.moments, sc.risk,
                                               sc.control_weight);
        }
        step.control = res.control;
        step.risks = res.plan_eval.step_risks;
        step.feasible = res.plan_eval.feasible;
        belief = res.moments.states.front();

        // Both bodies on the fine grid: the satellite's substep positions are
        // buffered, then paired with the debris substeps.
        std::vector<Vec3> sat_fine;
        sat_fine.reserve(static_cast<std::size_t>(sc.sim.substeps()));
        sat = advance_satellite(sat, step.control, sc.satellite_body, sc.sim,
                                [&](const Vec6& x) { sat_fine.push_back(x.head<3>()); });
        std::size_t sub = 0;
        debris = advance_debris(debris, sc.debris_body, sc.noise, sc.sim, &truth_rng,
                                [&](const Vec6& x) { record_fine(sat_fine[sub++], x.head<3>()); });
        rec.total_delta_v += step.control.norm() * sc.sim.control_period;
        rec.steps.push_back(std::move(step));
    }

    EpisodeStep last;
    last.time = n * sc.sim.control_period;
    last.satellite = sat;
    last.debris = debris;
    rec.steps.push_back(std::move(last));
    rec.collision = rec.min_distance < sc.risk.d_thres;
    return rec;
}

// ---------------------------------------------------------------------------
// Batch experiments
// ---------------------------------------------------------------------------

enum class SweepAxis { Epsilon, QScale, Propagator };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Epsilon: return "epsilon";
        case SweepAxis::QScale: return "q_scale";
        case SweepAxis::Propagator: return "propagator";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
    if (s == "epsilon") return SweepAxis::Epsilon;
    if (s == "q_scale") return SweepAxis::QScale;
    if (s == "propagator") return SweepAxis::Propagator;
    throw std::invalid_argument("unknown sweep axis '" + std::string(s) + "' (expected epsilon|q_scale|propagator)");
}

/// One configuration of a sweep: the axis value plus the propagator to use.
struct SweepPoint {
    SweepAxis axis = SweepAxis::Epsilon;
    double value = 0.0;  // ignored on the propagator axis
    PropagatorKind propagator = PropagatorKind::MonteCarlo;

    std::string value_label() const {
        if (axis == SweepAxis::Propagator) return std::string(to_string(propagator));
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", value);
        return buf;
    }
};

inline Scenario apply_sweep_point(Scenario sc, const SweepPoint& p) {
    switch (p.axis) {
        case SweepAxis::Epsilon: sc.risk.epsilon = p.value; break;
        case SweepAxis::QScale: sc.noise = ProcessNoise(defaults::process_noise(p.value)); break;
        case SweepAxis::Propagator: break;
    }
    sc.propagator.kind = p.propagator;
    return sc;
}

struct BatchRow {
    SweepPoint point;
    int runs = 0;
    int failed = 0;
    int collisions = 0;
    double min_distance_mean = 0.0;
    double min_distance_std = 0.0;
    double delta_v_mean = 0.0;
    double delta_v_std = 0.0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<double> min_distances;  // successful episodes, seed order
    std::vector<double> delta_vs;
};

inline std::uint64_t episode_seed(std::uint64_t master_seed, int run) {
    return derive_seed(master_seed, 0x657069ULL, static_cast<std::uint64_t>(run));
}

namespace detail {

inline void mean_std(std::span<const double> xs, double& mean, double& sd) {
    mean = sd = 0.0;
    if (xs.empty()) return;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Runs n_runs episodes per sweep point. Run j uses the same seed at every
/// point so configurations are compared on common random numbers. Episodes
/// that throw are recorded in failed_seeds and excluded from the statistics.
using BatchProgress = std::function<void(const SweepPoint&, int run, const EpisodeRecord*)>;

inline std::vector<BatchRow> run_batch(const Scenario& base, int n_runs, std::span<const SweepPoint> points,
                                       std::uint64_t master_seed, const BatchProgress& progress = {}) {
    if (n_runs < 1) throw std::domain_error("run_batch: n_runs must be >= 1");
    std::vector<BatchRow> rows;
    for (const auto& p : points) {
        BatchRow row;
        row.point = p;
        row.runs = n_runs;
        const Scenario sc = apply_sweep_point(base, p);
        for (int j = 0; j < n_runs; ++j) {
            Scenario run = sc;
            run.seed = episode_seed(master_seed, j);
            row.seeds.push_back(run.seed);
            try {
                const EpisodeRecord rec = run_episode(run);
                row.min_distances.push_back(rec.min_distance);
                row.delta_vs.push_back(rec.total_delta_v);
                if (rec.collision) ++row.collisions;
                if (progress) progress(p, j, &rec);
            } catch (const std::exception&) {
                ++row.failed;
                row.failed_seeds.push_back(run.seed);
                if (progress) progress(p, j, nullptr);
            }
        }
        detail::mean_std(row.min_distances, row.min_distance_mean, row.min_distance_std);
        detail::mean_std(row.delta_vs, row.delta_v_mean, row.delta_v_std);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace drcc
