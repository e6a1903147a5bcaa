#include "doctest.h"

#include <random>
#include <sstream>

#include "semsched/policy.hpp"

using namespace semsched;

namespace {

SystemParams small_params(int B = 3, int dmax = 6) {
    RawParams r;
    r.B = B;
    r.delta_max = dmax;
    r.allow_tight_truncation = true;
    return validate_params(r);
}

} // namespace

TEST_CASE("state index enumerates metric-major") {
    const StateIndex space(3, 1);
    CHECK(space.size() == 16);
    CHECK(StateIndex(100, 10).size() == 2222);
    for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.state(i)) == i);
    CHECK(space.state(0) == AgentState{0, 0, 0});
    CHECK(space.state(1) == AgentState{0, 0, 1});
    CHECK(space.state(2) == AgentState{0, 1, 0});
    CHECK(space.state(4) == AgentState{1, 0, 0});
}

TEST_CASE("greedy policy") {
    const auto p = small_params();
    const auto g = greedy_policy(p);
    CHECK(g.action({0, 2, 0}) == Action::Transmit);
    CHECK(g.action({5, 1, 1}) == Action::Transmit);
    CHECK(g.action({6, 0, 1}) == Action::Idle);
    CHECK_FALSE(g.depends_on_metric());
    const StateIndex space(p);
    for (std::size_t i = 0; i < space.size(); ++i)
        CHECK((g.at(i) == Action::Transmit) == (space.state(i).battery >= 1));
}

TEST_CASE("policy tables reject infeasible or out-of-range use") {
    const auto p = small_params();
    std::vector<Action> acts(StateIndex(p).size(), Action::Transmit);
    CHECK_THROWS_AS(PolicyTable(p, MetricKind::AoI, "bad", acts), Error);
    CHECK_THROWS_AS(PolicyTable(p, MetricKind::AoI, "short", std::vector<Action>(3)), Error);
    const auto g = greedy_policy(p);
    CHECK_THROWS_AS(g.action({7, 1, 0}), Error);
    CHECK_THROWS_AS(g.action({1, 4, 0}), Error);
    CHECK_THROWS_AS(g.action({1, 1, 2}), Error);
}

TEST_CASE("extract_thresholds on constant slices") {
    const auto p = small_params();
    const auto t = extract_thresholds(greedy_policy(p));
    for (int q = 0; q <= 1; ++q) {
        CHECK(t.threshold(0, q) == t.never());
        for (int b = 1; b <= 3; ++b) CHECK(t.threshold(b, q) == 0);
    }
    const auto idle = extract_thresholds(idle_policy(p));
    for (int v : idle.thresholds()) CHECK(v == p.delta_max() + 1);
}

TEST_CASE("threshold switch point is inclusive") {
    const auto p = small_params();
    std::vector<int> thr(8, p.delta_max() + 1);
    thr[2 * 2 + 1] = 3;  // battery 2, query 1
    const ThresholdPolicy t(p, MetricKind::QVAoI, thr);
    CHECK(policy_action(t, {3, 2, 1}) == Action::Transmit);
    CHECK(policy_action(t, {2, 2, 1}) == Action::Idle);
    CHECK(policy_action(t, {6, 2, 0}) == Action::Idle);
    CHECK(policy_action(t, {6, 0, 1}) == Action::Idle);
    CHECK_THROWS_AS(policy_action(t, {7, 2, 1}), Error);
    CHECK_THROWS_AS(ThresholdPolicy(p, MetricKind::QVAoI, std::vector<int>{0, 0, 0, 0, 0, 0, 0, 0}), Error);
}

TEST_CASE("non-threshold tables are reported") {
    const auto p = small_params();
    const StateIndex space(p);
    std::vector<Action> acts(space.size(), Action::Idle);
    acts[space.index({2, 1, 0})] = Action::Transmit;
    const PolicyTable table(p, MetricKind::VAoI, "spike", acts);
    try {
        extract_thresholds(table);
        FAIL("expected NotThresholdStructured");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotThresholdStructured);
        CHECK(std::string(e.what()).find("battery=1, query=0") != std::string::npos);
    }
}

TEST_CASE("threshold round trip property") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const int B = 1 + static_cast<int>(rng() % 5);
        const int D = 1 + static_cast<int>(rng() % 12);
        const auto p = small_params(B, D);
        std::vector<int> thr;
        for (int b = 0; b <= B; ++b)
            for (int q = 0; q <= 1; ++q) thr.push_back(b == 0 ? D + 1 : static_cast<int>(rng() % (D + 2)));
        const ThresholdPolicy t(p, MetricKind::QAoI, thr);
        const auto table = t.to_table("t");
        CHECK(extract_thresholds(table) == t);
        const StateIndex space(p);
        for (std::size_t i = 0; i < space.size(); ++i)
            CHECK(policy_action(table, space.state(i)) == policy_action(t, space.state(i)));

        std::stringstream io;
        write_thresholds(io, t);
        CHECK(read_thresholds(io) == t);
    }
}

TEST_CASE("threshold file layout") {
    const auto p = small_params(1, 2);
    std::stringstream io;
    write_thresholds(io, extract_thresholds(greedy_policy(p)));
    const auto text = io.str();
    CHECK(text.find("# kind = VAoI\n") != std::string::npos);
    CHECK(text.find("\n0 0 3\n0 1 3\n1 0 0\n1 1 0\n") != std::string::npos);
}

TEST_CASE("monotone_in_battery") {
    const auto p = small_params();
    const int n = p.delta_max() + 1;
    CHECK(ThresholdPolicy(p, MetricKind::VAoI, {n, n, 5, 5, 3, 3, 1, 1}).monotone_in_battery());
    CHECK_FALSE(ThresholdPolicy(p, MetricKind::VAoI, {n, n, 2, 2, 3, 3, 1, 1}).monotone_in_battery());
}
