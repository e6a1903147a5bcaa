#include "doctest.h"

#include <cmath>

#include "semsched/evaluate.hpp"
#include "semsched/mdp.hpp"

using namespace semsched;

namespace {

SystemParams make(double p_s, double p_v, double p_q, double p_e, int B, int dmax) {
    RawParams r;
    r.p_s = p_s;
    r.p_v = p_v;
    r.p_q = p_q;
    r.p_e = p_e;
    r.B = B;
    r.delta_max = dmax;
    r.allow_tight_truncation = true;
    return validate_params(r);
}

} // namespace

TEST_CASE("idle policy saturates the age") {
    const auto p = make(0.8, 0.25, 0.2, 0.05, 10, 100);
    CHECK(evaluate_policy_exact(p, MetricKind::AoI, idle_policy(p)) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(evaluate_policy_exact(p, MetricKind::QAoI, idle_policy(p)) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("greedy is strictly worse than the solved policy in the low-charging setting") {
    const auto p = make(0.8, 0.25, 0.2, 0.05, 10, 100);
    const auto solved = rvia_solve(p, MetricKind::QVAoI);
    REQUIRE(solved.converged);
    const double greedy = evaluate_policy_exact(p, MetricKind::QVAoI, greedy_policy(p));
    CHECK(std::isfinite(greedy));
    CHECK(greedy > solved.gain);
    CHECK(std::abs(evaluate_policy_exact(p, MetricKind::QVAoI, solved.policy) - solved.gain) < 1e-9);
}

TEST_CASE("solved policies evaluate to their gain") {
    const auto p = make(0.7, 0.3, 0.4, 0.15, 4, 25);
    for (auto kind : kAllKinds) {
        const auto r = rvia_solve(p, kind);
        REQUIRE(r.converged);
        CHECK(std::abs(evaluate_policy_exact(p, kind, r.policy) - r.gain) < 1e-9);
    }
}

TEST_CASE("joint tracking agrees with single-metric tracking") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 30);
    const auto aoi_policy = rvia_solve(p, MetricKind::AoI).policy;
    const auto vaoi_policy = rvia_solve(p, MetricKind::VAoI).policy;
    for (const auto* pol : {&aoi_policy, &vaoi_policy}) {
        const auto all = evaluate_policy(p, *pol);
        for (auto kind : kAllKinds) CHECK(std::abs(all[kind] - evaluate_policy_exact(p, kind, *pol)) < 1e-9);
        CHECK(all[MetricKind::QVAoI] == doctest::Approx(0.3 * all[MetricKind::VAoI]).epsilon(1e-12));
        CHECK(all.transmit_rate > 0);
        CHECK(all.transmit_rate <= p.energy_prob() + 1e-12);
    }
    CHECK(evaluation_chain_size(p, MetricKind::QVAoI, aoi_policy) > evaluation_chain_size(p, MetricKind::QVAoI, vaoi_policy));
}

TEST_CASE("multichain policies are rejected") {
    // No harvesting: one failed attempt strands the device at battery 1,
    // a success followed by a second attempt strands it at battery 0.
    const auto p = make(0.5, 0.25, 0.5, 0.0, 2, 4);
    const StateIndex space(p);
    std::vector<Action> acts(space.size(), Action::Idle);
    for (int q = 0; q <= 1; ++q) {
        acts[space.index({4, 2, q})] = Action::Transmit;
        acts[space.index({1, 1, q})] = Action::Transmit;
    }
    const PolicyTable table(p, MetricKind::AoI, "split", acts);
    try {
        evaluate_policy_exact(p, MetricKind::AoI, table);
        FAIL("expected MultichainPolicy");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MultichainPolicy);
    }
}

TEST_CASE("stamp mismatch is rejected") {
    const auto p = make(0.8, 0.25, 0.2, 0.05, 3, 20);
    CHECK_THROWS_AS(evaluate_policy_exact(p.with_energy_prob(0.1), MetricKind::AoI, greedy_policy(p)), Error);
}

TEST_CASE("brute force enumeration counts and bounds") {
    const auto p = make(0.8, 0.25, 0.3, 0.4, 1, 3);
    const auto bf = enumerate_optimal_bruteforce(p, MetricKind::QVAoI);
    CHECK(StateIndex(p).size() == 16);
    CHECK(bf.evaluated + bf.skipped_multichain == 256);
    CHECK(bf.cost <= evaluate_policy_exact(p, MetricKind::QVAoI, greedy_policy(p)) + 1e-12);

    CHECK_THROWS_AS(enumerate_optimal_bruteforce(make(0.8, 0.25, 0.3, 0.2, 4, 8), MetricKind::AoI), Error);
    CHECK_THROWS_AS(enumerate_optimal_bruteforce(make(0.8, 0.25, 0.3, 0.2, 3, 7), MetricKind::AoI, 1000), Error);
}

TEST_CASE("brute force agrees with relative value iteration") {
    const SystemParams cases[] = {make(0.8, 0.25, 0.3, 0.4, 1, 3), make(0.6, 0.5, 0.7, 0.3, 1, 4),
                                  make(0.9, 0.1, 0.2, 0.6, 2, 3), make(0.5, 0.8, 0.5, 0.5, 1, 5)};
    for (const auto& p : cases)
        for (auto kind : kAllKinds) {
            const auto bf = enumerate_optimal_bruteforce(p, kind);
            SolveOptions opts;
            opts.tol = 1e-12;
            const auto r = rvia_solve(p, kind, opts);
            REQUIRE(r.converged);
            CHECK(std::abs(bf.cost - r.gain) < 1e-6);
        }
}
