#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace drcc;
using namespace drcc::testing;

namespace {

/// cost = ||u - target||^2, every candidate feasible.
struct Surrogate {
    ControlSequence target;
    CandidateEvaluation operator()(const ControlSequence& u) const {
        CandidateEvaluation e;
        e.fuel_cost = (u - target).squaredNorm();
        e.feasible = true;
        return e;
    }
};

SamplingDistribution zero_start(int k, double std) {
    return {ControlSequence::Zero(k, 3), ControlSequence::Constant(k, 3, std)};
}

ControlSequence random_target(Rng& rng, int k, double half_width) {
    std::uniform_real_distribution<double> uni(-half_width, half_width);
    ControlSequence t(k, 3);
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < 3; ++c) t(i, c) = uni(rng);
    return t;
}

}  // namespace

TEST(FuelCost, Examples) {
    EXPECT_EQ(fuel_cost(ControlSequence::Zero(4, 3), Mat3::Identity()), 0.0);
    ControlSequence u(1, 3);
    u << 0.03, 0.0, 0.04;
    EXPECT_NEAR(fuel_cost(u, Mat3::Identity()), 0.0025, 1e-17);
}

TEST(FuelCost, MatchesQuadraticFormOracle) {
    Rng rng = make_rng(31);
    for (int t = 0; t < 50; ++t) {
        const ControlSequence u = random_target(rng, 5, 0.05);
        const Mat3 r = random_psd3(rng) + 0.1 * Mat3::Identity();
        double expect = 0.0;
        for (int k = 0; k < 5; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) expect += u(k, i) * r(i, j) * u(k, j);
        EXPECT_NEAR(fuel_cost(u, r), expect, 1e-15);
        EXPECT_GT(fuel_cost(u, r), 0.0);
    }
}

TEST(Bounds, ClampAndContains) {
    const ControlBounds b;
    ControlSequence u(2, 3);
    u << 0.1, -0.1, 0.01, -0.06, 0.05, 0.0;
    EXPECT_FALSE(b.contains(u));
    b.clamp(u);
    EXPECT_TRUE(b.contains(u));
    EXPECT_EQ(u(0, 0), 0.05);
    EXPECT_EQ(u(0, 1), -0.05);
    EXPECT_EQ(u(0, 2), 0.01);
    EXPECT_EQ(u(1, 0), -0.05);
    ControlBounds bad;
    bad.lower(0) = 1.0;
    EXPECT_THROW(bad.validate(), std::domain_error);
}

TEST(UpdateDistribution, Examples) {
    const SamplingDistribution prev{ControlSequence::Constant(2, 3, 0.01), ControlSequence::Constant(2, 3, 0.02)};
    ControlSequence e(2, 3);
    e << 1, 2, 3, 4, 5, 6;
    const std::vector<ControlSequence> single{e};
    const auto a0 = update_distribution(single, prev, 0.0, 1e-4);
    EXPECT_EQ(a0.mean, e);
    EXPECT_EQ(a0.std, ControlSequence::Constant(2, 3, 1e-4));

    const auto a1 = update_distribution(single, prev, 1.0, 1e-4);
    EXPECT_EQ(a1.mean, prev.mean);
    EXPECT_EQ(a1.std, prev.std);

    // two members 0 and 2: mean 1, population std 1
    const std::vector<ControlSequence> two{ControlSequence::Zero(2, 3), ControlSequence::Constant(2, 3, 2.0)};
    const auto h = update_distribution(two, prev, 0.5, 1e-4);
    EXPECT_LT((h.mean - ControlSequence::Constant(2, 3, 0.5 * 0.01 + 0.5 * 1.0)).norm(), 1e-15);
    EXPECT_LT((h.std - ControlSequence::Constant(2, 3, 0.5 * 0.02 + 0.5 * 1.0)).norm(), 1e-15);

    EXPECT_THROW(update_distribution(std::vector<ControlSequence>{}, prev, 0.5, 1e-4), std::domain_error);
}

TEST(SelectElite, FeasibleFirstByFuel) {
    std::vector<CandidateEvaluation> ev(6);
    const double fuel[] = {5, 1, 3, 0.5, 2, 2};
    const bool feas[] = {true, false, true, false, true, true};
    for (int i = 0; i < 6; ++i) {
        ev[i].fuel_cost = fuel[i];
        ev[i].feasible = feas[i];
        ev[i].trajectory_risk = -i;
    }
    const auto idx = select_elite(ev, 3);
    EXPECT_EQ(idx, (std::vector<std::size_t>{4, 5, 2}));  // tie 4/5 kept in index order
    for (auto i : idx) EXPECT_TRUE(ev[i].feasible);
}

TEST(SelectElite, AllInfeasibleMinimizesRisk) {
    Rng rng = make_rng(32);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<CandidateEvaluation> ev(50);
    for (auto& e : ev) {
        e.trajectory_risk = std::round(uni(rng) * 10.0);  // plenty of ties
        e.fuel_cost = uni(rng);
    }
    const auto idx = select_elite(ev, 10);
    std::vector<std::size_t> oracle(50);
    std::iota(oracle.begin(), oracle.end(), 0);
    std::sort(oracle.begin(), oracle.end(), [&](std::size_t a, std::size_t b) {
        return ev[a].trajectory_risk != ev[b].trajectory_risk ? ev[a].trajectory_risk < ev[b].trajectory_risk : a < b;
    });
    oracle.resize(10);
    EXPECT_EQ(idx, oracle);
}

TEST(Cem, RecoversSurrogateOptimum) {
    Rng rng = make_rng(33);
    int hits = 0;
    for (int run = 0; run < 100; ++run) {
        const Surrogate s{random_target(rng, 3, 0.04)};
        const auto res = cem_solve(s, zero_start(3, 0.02), ControlBounds{}, CemParams{}, derive_seed(33, run));
        if ((res.best - s.target).cwiseAbs().maxCoeff() <= 1e-2) ++hits;
    }
    EXPECT_GE(hits, 95);
}

TEST(Cem, RespectsBoundsAndIsDeterministic) {
    // optimum outside the box: the answer sits on the boundary
    const Surrogate s{ControlSequence::Constant(4, 3, 0.2)};
    const CemParams p;
    const auto a = cem_solve(s, zero_start(4, 0.02), ControlBounds{}, p, 5);
    const auto b = cem_solve(s, zero_start(4, 0.02), ControlBounds{}, p, 5);
    const auto c = cem_solve(s, zero_start(4, 0.02), ControlBounds{}, p, 6);
    EXPECT_TRUE(ControlBounds{}.contains(a.best));
    EXPECT_EQ(a.best, b.best);
    EXPECT_EQ(a.iterations.size(), static_cast<std::size_t>(p.max_iterations));
    EXPECT_LT((a.best - ControlSequence::Constant(4, 3, 0.05)).cwiseAbs().maxCoeff(), 1e-2);
    EXPECT_LT((c.best - ControlSequence::Constant(4, 3, 0.05)).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Cem, BestCostNonIncreasingWithoutSmoothing) {
    Rng rng = make_rng(35);
    CemParams p;
    p.smoothing = 0.0;
    for (int run = 0; run < 10; ++run) {
        const Surrogate s{random_target(rng, 3, 0.04)};
        const auto res = cem_solve(s, zero_start(3, 0.02), ControlBounds{}, p, run);
        for (std::size_t i = 1; i < res.iterations.size(); ++i) {
            ASSERT_TRUE(res.iterations[i].feasible_branch);
            EXPECT_LE(res.iterations[i].best_cost, res.iterations[i - 1].best_cost);
        }
    }
}

TEST(Cem, InfeasibleBranchDescendsRisk) {
    // No candidate is ever feasible; risk = ||u - a||^2 must still be driven down.
    ControlSequence a = ControlSequence::Constant(3, 3, 0.03);
    const auto eval = [&](const ControlSequence& u) {
        CandidateEvaluation e;
        e.feasible = false;
        e.trajectory_risk = (u - a).squaredNorm();
        e.fuel_cost = u.squaredNorm();
        return e;
    };
    const auto res = cem_solve(eval, zero_start(3, 0.02), ControlBounds{}, CemParams{}, 8);
    EXPECT_FALSE(res.iterations.back().feasible_branch);
    EXPECT_LT(res.best_eval.trajectory_risk, 1e-4);
}

TEST(Cem, TriviallySafeProblemPrefersLittleThrust) {
    // Real rollout against a debris belief 100 km away with tiny spread.
    const SimConfig sim;
    const Vec6 sat = defaults::satellite_state();
    Vec6 far = sat;
    far.head<3>() += Vec3(100.0, 0.0, 0.0);
    const OrbitalDebrisModel model{BodyParams{50.0, 1.0, 2.2}, ProcessNoise{}, sim};
    const auto moments = linear_propagate(model, StateBelief(far, 1e-10 * Mat6::Identity()), 3);
    const RiskParams risk;
    const auto eval = [&](const ControlSequence& u) {
        return evaluate_candidate(u, sat, BodyParams{}, sim, moments, risk, Mat3::Identity());
    };
    CemParams p;
    p.population = 40;
    p.elite_count = 5;
    p.max_iterations = 5;
    const auto res = cem_solve(eval, zero_start(3, 0.02), ControlBounds{}, p, 1);
    EXPECT_TRUE(res.best_eval.feasible);
    EXPECT_LT(res.best_eval.fuel_cost, fuel_cost(ControlSequence::Constant(3, 3, 0.05), Mat3::Identity()));
    for (std::size_t i = 1; i < res.iterations.size(); ++i)
        EXPECT_LE(res.iterations[i].best_cost, res.iterations[i - 1].best_cost);
}

TEST(Params, Validation) {
    CemParams p;
    p.elite_count = 1;
    EXPECT_THROW(p.validate(), std::domain_error);
    p = {};
    p.elite_count = p.population + 1;
    EXPECT_THROW(p.validate(), std::domain_error);
    p = {};
    p.std_floor = 0.0;
    EXPECT_THROW(p.validate(), std::domain_error);
}
