#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

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

double total(const std::vector<TransitionEntry>& row) {
    double s = 0;
    for (const auto& e : row) s += e.prob;
    return s;
}

} // namespace

TEST_CASE("build_state_space sizes and order") {
    CHECK(build_state_space(make(0.8, 0.25, 0.2, 0.05, 1, 3)).size() == 16);
    const auto big = build_state_space(make(0.8, 0.25, 0.2, 0.05, 10, 100));
    CHECK(big.size() == 2222);
    CHECK(big.front() == AgentState{0, 0, 0});
    CHECK(big[1] == AgentState{0, 0, 1});
    CHECK(big.back() == AgentState{100, 10, 1});
    CHECK(build_state_space(make(0.8, 0.25, 0.2, 0.05, 10, 100)) == big);
}

TEST_CASE("transition with randomness switched off") {
    const auto p = make(1.0, 0.0, 0.0, 0.0, 3, 10);
    auto row = transition(p, MetricKind::VAoI, {2, 1, 1}, Action::Transmit);
    REQUIRE(row.size() == 1);
    CHECK(row[0].next == AgentState{0, 0, 0});
    CHECK(row[0].prob == 1.0);

    row = transition(p, MetricKind::AoI, {4, 0, 0}, Action::Idle);
    REQUIRE(row.size() == 1);
    CHECK(row[0].next == AgentState{5, 0, 0});
    CHECK(row[0].prob == 1.0);

    CHECK_THROWS_AS(transition(p, MetricKind::AoI, {4, 0, 0}, Action::Transmit), Error);
}

TEST_CASE("transition merges the 16-outcome product") {
    // Frozen from exact rational enumeration of success x energy x version x next-query.
    const auto p = make(0.8, 0.25, 0.2, 0.05, 4, 8);
    const auto row = transition(p, MetricKind::QVAoI, {1, 1, 1}, Action::Transmit);
    const std::vector<TransitionEntry> expected = {
        {{0, 0, 0}, 0.456},  {{0, 0, 1}, 0.114},   {{0, 1, 0}, 0.024},  {{0, 1, 1}, 0.006},
        {{1, 0, 0}, 0.266},  {{1, 0, 1}, 0.0665},  {{1, 1, 0}, 0.014},  {{1, 1, 1}, 0.0035},
        {{2, 0, 0}, 0.038},  {{2, 0, 1}, 0.0095},  {{2, 1, 0}, 0.002},  {{2, 1, 1}, 0.0005}};
    REQUIRE(row.size() == expected.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        CHECK(row[i].next == expected[i].next);
        CHECK(row[i].prob == doctest::Approx(expected[i].prob).epsilon(1e-14));
    }
    CHECK(std::abs(total(row) - 1.0) <= 1e-12);
}

TEST_CASE("transition rows are stochastic and respect bounds") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = make(0.05 + 0.95 * u(rng), u(rng), u(rng), u(rng), 1 + static_cast<int>(rng() % 4),
                            1 + static_cast<int>(rng() % 9));
        for (auto kind : kAllKinds)
            for (const auto& s : build_state_space(p))
                for (auto a : {Action::Idle, Action::Transmit}) {
                    if (a == Action::Transmit && s.battery == 0) continue;
                    const auto row = transition(p, kind, s, a);
                    CHECK(std::abs(total(row) - 1.0) <= 1e-12);
                    for (const auto& e : row) {
                        CHECK(e.prob > 0);
                        CHECK(e.next.battery <= p.battery_capacity());
                        CHECK(e.next.battery <= s.battery + 1);
                        CHECK(e.next.metric <= p.delta_max());
                    }
                }
    }
}

TEST_CASE("rvia without queries is free and idle") {
    const auto p = make(0.8, 0.25, 0.0, 0.2, 3, 20);
    const auto r = rvia_solve(p, MetricKind::QVAoI);
    CHECK(r.converged);
    CHECK(r.gain == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.policy.transmit_count() == 0);
}

TEST_CASE("rvia without version changes has zero version lag") {
    const auto p = make(0.8, 0.0, 0.3, 0.2, 3, 20);
    const auto r = rvia_solve(p, MetricKind::VAoI);
    CHECK(r.converged);
    CHECK(std::abs(r.gain) < 1e-9);
}

TEST_CASE("rvia matches the linear-programming optimum") {
    // Gains frozen from tests/oracles/lp_gain.py on (0.8, 0.25, 0.3, 0.2, B=4, delta_max=8).
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 8);
    const std::pair<MetricKind, double> expected[] = {{MetricKind::AoI, 3.943952483319622},
                                                      {MetricKind::VAoI, 0.8311116380170915},
                                                      {MetricKind::QAoI, 1.183185744995886},
                                                      {MetricKind::QVAoI, 0.2493334913423726}};
    for (auto [kind, gain] : expected) {
        const auto r = rvia_solve(p, kind);
        CHECK(r.converged);
        CHECK(r.residual_span < 1e-9);
        CHECK(std::abs(r.gain - gain) < 1e-6);
    }
}

TEST_CASE("rvia gain does not depend on the reference state") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    const StateIndex space(p);
    const auto base = rvia_solve(p, MetricKind::QVAoI);
    for (AgentState ref : {AgentState{5, 2, 1}, AgentState{20, 4, 0}, AgentState{1, 0, 1}}) {
        SolveOptions opts;
        opts.reference_state = space.index(ref);
        const auto r = rvia_solve(p, MetricKind::QVAoI, opts);
        CHECK(r.converged);
        CHECK(std::abs(r.gain - base.gain) < 1e-8);
        CHECK(r.policy.actions() == base.policy.actions());
    }
}

TEST_CASE("rvia structural properties") {
    const auto p = make(0.8, 0.25, 0.3, 0.1, 5, 30);
    const auto v = rvia_solve(p, MetricKind::VAoI);
    const auto qv = rvia_solve(p, MetricKind::QVAoI);
    CHECK(qv.gain <= v.gain + 1e-9);
    for (const auto* r : {&v, &qv})
        for (int b = 0; b <= p.battery_capacity(); ++b)
            for (int q = 0; q <= 1; ++q) CHECK(r->policy.action({0, b, q}) == Action::Idle);
    for (const auto& s : build_state_space(p))
        if (s.battery == 0) CHECK(qv.policy.action(s) == Action::Idle);
}

TEST_CASE("rvia reports non-convergence") {
    const auto p = make(0.8, 0.25, 0.3, 0.1, 3, 30);
    SolveOptions opts;
    opts.max_iter = 2;
    const auto r = rvia_solve(p, MetricKind::AoI, opts);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
    CHECK(r.residual_span >= opts.tol);
    opts.tol = 0;
    CHECK_THROWS_AS(rvia_solve(p, MetricKind::AoI, opts), Error);
}

TEST_CASE("solve result files round-trip byte for byte") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 3, 12);
    const auto r = rvia_solve(p, MetricKind::QVAoI);
    std::stringstream first;
    write_solve_result(first, r);
    const auto text = first.str();
    std::istringstream in(text);
    const auto back = read_solve_result(in);
    CHECK(back.gain == r.gain);
    CHECK(back.bias == r.bias);
    CHECK(back.policy == r.policy);
    CHECK(back.iterations == r.iterations);
    std::stringstream second;
    write_solve_result(second, back);
    CHECK(second.str() == text);

    std::istringstream again(text);
    CHECK(read_policy_table(again) == r.policy);

    std::string truncated = text.substr(0, text.size() / 2);
    truncated = truncated.substr(0, truncated.rfind('\n') + 1);
    std::istringstream bad(truncated);
    CHECK_THROWS_AS(read_solve_result(bad), Error);
}
