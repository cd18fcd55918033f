#pragma once

// Constrained cross-entropy method over thrust sequences.
//
// Each iteration samples a diagonal-Gaussian population (clamped to the box),
// evaluates every candidate, and picks the elite set: the cheapest feasible
// candidates when any exist, otherwise the candidates with the lowest
// trajectory risk. The previous elites and the current sampling mean are
// re-entered into every pool, so the best candidate found is never lost.

#include "drcc/dynamics.hpp"
#include "drcc/parallel.hpp"
#include "drcc/types.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace drcc {

struct ControlBounds {
    Vec3 lower = Vec3::Constant(-0.05);
    Vec3 upper = Vec3::Constant(0.05);

    void validate() const {
        if (!lower.allFinite() || !upper.allFinite() || !(lower.array() <= upper.array()).all())
            throw std::domain_error("control bounds must be finite with lower <= upper");
    }

    void clamp(ControlSequence& u) const {
        for (Eigen::Index k = 0; k < u.rows(); ++k)
            u.row(k) = u.row(k).cwiseMax(lower.transpose()).cwiseMin(upper.transpose());
    }

    bool contains(const ControlSequence& u) const {
        for (Eigen::Index k = 0; k < u.rows(); ++k)
            if ((u.row(k).transpose().array() < lower.array()).any() ||
                (u.row(k).transpose().array() > upper.array()).any())
                return false;
        return true;
    }
};

struct CemParams {
    int population = 200;
    int elite_count = 20;
    int max_iterations = 15;
    double init_std = 0.02;   // km/s^2, applied to every component
    double std_floor = 1e-4;  // km/s^2
    double smoothing = 0.2;   // weight kept on the previous distribution

    void validate() const {
        if (population < 2) throw std::domain_error("cem.population must be >= 2");
        if (elite_count < 2 || elite_count > population)
            throw std::domain_error("cem.elite_count must be in [2, population]");
        if (max_iterations < 1) throw std::domain_error("cem.max_iterations must be >= 1");
        if (!(init_std > 0.0)) throw std::domain_error("cem.init_std must be > 0");
        if (!(std_floor > 0.0)) throw std::domain_error("cem.std_floor must be > 0");
        if (!(smoothing >= 0.0 && smoothing < 1.0)) throw std::domain_error("cem.smoothing must be in [0, 1)");
    }
};

struct CandidateEvaluation {
    double fuel_cost = 0.0;
    bool feasible = false;
    double trajectory_risk = 0.0;
    std::vector<double> step_risks;  // per horizon step, empty when not tracked
};

/// Diagonal Gaussian over K x 3 thrust sequences.
struct SamplingDistribution {
    ControlSequence mean;
    ControlSequence std;
};

struct CemIteration {
    int candidates = 0;
    int feasible_count = 0;
    bool feasible_branch = false;
    double best_cost = 0.0;  // fuel of elite[0] (feasible branch) else its fuel
    double best_risk = 0.0;
};

struct CemResult {
    ControlSequence best;
    CandidateEvaluation best_eval;
    SamplingDistribution final_distribution;
    std::vector<CemIteration> iterations;
};

/// sum_k u_k^T R u_k
inline double fuel_cost(const ControlSequence& u, const Mat3& weight) {
    double j = 0.0;
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
        const Vec3 uk = u.row(k).transpose();
        j += uk.dot(weight * uk);
    }
    return j;
}

/// mean' = a * mean + (1 - a) * elite_mean, std' = max(a * std + (1 - a) * elite_std, floor).
/// The elite spread uses the population (1/M) standard deviation.
inline SamplingDistribution update_distribution(std::span<const ControlSequence> elite,
                                                const SamplingDistribution& prev, double smoothing,
                                                double std_floor) {
    if (elite.empty()) throw std::domain_error("update_distribution: empty elite set");
    const auto m = static_cast<double>(elite.size());
    ControlSequence mu = ControlSequence::Zero(prev.mean.rows(), 3);
    for (const auto& e : elite) mu += e;
    mu /= m;
    ControlSequence var = ControlSequence::Zero(prev.mean.rows(), 3);
    for (const auto& e : elite) var.array() += (e - mu).array().square();
    var /= m;
    SamplingDistribution next;
    next.mean = smoothing * prev.mean + (1.0 - smoothing) * mu;
    next.std = (smoothing * prev.std.array() + (1.0 - smoothing) * var.array().sqrt()).cwiseMax(std_floor);
    return next;
}

/// Indices of the elite set. Feasible candidates sorted by fuel when any
/// exist, otherwise all candidates sorted by trajectory risk; stable on index.
inline std::vector<std::size_t> select_elite(std::span<const CandidateEvaluation> evals, std::size_t elite_count) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < evals.size(); ++i)
        if (evals[i].feasible) idx.push_back(i);
    if (!idx.empty()) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return evals[a].fuel_cost < evals[b].fuel_cost; });
    } else {
        idx.resize(evals.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return evals[a].trajectory_risk < evals[b].trajectory_risk;
        });
    }
    if (idx.size() > elite_count) idx.resize(elite_count);
    return idx;
}

/// `evaluate` maps a (clamped) ControlSequence to a CandidateEvaluation and
/// must be safe to call concurrently.
template <class Evaluator>
CemResult cem_solve(Evaluator&& evaluate, const SamplingDistribution& init, const ControlBounds& bounds,
                    const CemParams& params, std::uint64_t seed) {
    params.validate();
    bounds.validate();
    const Eigen::Index horizon = init.mean.rows();
    if (horizon < 1 || init.std.rows() != horizon) throw std::domain_error("cem_solve: bad initial distribution");

    SamplingDistribution dist = init;
    std::vector<ControlSequence> elite_u;
    std::vector<CandidateEvaluation> elite_eval;
    CemResult result;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        const std::size_t carried = elite_u.size();
        const std::size_t fresh = static_cast<std::size_t>(params.population) + 1;
        std::vector<ControlSequence> pool(carried + fresh);
        std::vector<CandidateEvaluation> evals(carried + fresh);
        for (std::size_t i = 0; i < carried; ++i) {
            pool[i] = std::move(elite_u[i]);
            evals[i] = std::move(elite_eval[i]);
        }

        parallel_for(fresh, [&](std::size_t j) {
            ControlSequence u;
            if (j == 0) {
                u = dist.mean;
            } else {
                Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(iter), j));
                std::normal_distribution<double> nd(0.0, 1.0);
                u.resize(horizon, 3);
                for (Eigen::Index k = 0; k < horizon; ++k)
                    for (int c = 0; c < 3; ++c) u(k, c) = dist.mean(k, c) + dist.std(k, c) * nd(rng);
            }
            bounds.clamp(u);
            evals[carried + j] = evaluate(static_cast<const ControlSequence&>(u));
            pool[carried + j] = std::move(u);
        });

        const auto chosen = select_elite(evals, static_cast<std::size_t>(params.elite_count));
        elite_u.clear();
        elite_eval.clear();
        for (std::size_t i : chosen) {
            elite_u.push_back(pool[i]);
            elite_eval.push_back(evals[i]);
        }

        CemIteration it;
        it.candidates = static_cast<int>(pool.size());
        it.feasible_count = static_cast<int>(std::count_if(evals.begin(), evals.end(),
                                                           [](const CandidateEvaluation& e) { return e.feasible; }));
        it.feasible_branch = it.feasible_count > 0;
        it.best_cost = elite_eval.front().fuel_cost;
        it.best_risk = elite_eval.front().trajectory_risk;
        result.iterations.push_back(it);

        dist = update_distribution(elite_u, dist, params.smoothing, params.std_floor);
    }

    result.best = elite_u.front();
    result.best_eval = elite_eval.front();
    result.final_distribution = dist;
    return result;
}

}  // namespace drcc
