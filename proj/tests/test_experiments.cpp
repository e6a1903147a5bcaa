#include "doctest.h"

#include <cmath>
#include <sstream>

#include "semsched/evaluate.hpp"
#include "semsched/experiments.hpp"
#include "semsched/textio.hpp"

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

double qvaoi(const std::vector<CompareRow>& rows, PolicyId id) {
    for (const auto& r : rows)
        if (r.policy == id) return r.cs[static_cast<std::size_t>(MetricKind::QVAoI)];
    FAIL("policy missing");
    return 0;
}

std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') out.push_back(line);
    return out;
}

} // namespace

TEST_CASE("policy names round-trip") {
    for (auto id : kAllPolicies) CHECK(parse_policy_id(to_string(id)) == id);
    CHECK(parse_policy_id("qvaoi-aware") == PolicyId::QVAoIAware);
    CHECK_THROWS_AS(parse_policy_id("optimal"), Error);
}

TEST_CASE("a greedy-only comparison is one exact row") {
    const auto p = make(0.8, 0.25, 0.2, 0.2, 6, 40);
    const PolicyId set[] = {PolicyId::Greedy};
    const auto rows = compare_policies(p, set);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].ok);
    CHECK(rows[0].mode == EvalMode::Exact);
    CHECK(rows[0].cs[3] == doctest::Approx(evaluate_policy_exact(p, MetricKind::QVAoI, greedy_policy(p))).epsilon(1e-12));
    CHECK(rows[0].monitor_qvaoi == doctest::Approx(rows[0].cs[3] + 0.2 * 4 * 0.25).epsilon(1e-12));
}

TEST_CASE("semantics-aware policies order as expected with moderate charging") {
    const auto p = make(0.8, 0.25, 0.2, 0.2, 10, 100);
    const auto rows = compare_policies(p, kAllPolicies);
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) CHECK(r.ok);
    CHECK(qvaoi(rows, PolicyId::QVAoIAware) < qvaoi(rows, PolicyId::QAoIAware));
    CHECK(qvaoi(rows, PolicyId::VAoIAware) < qvaoi(rows, PolicyId::AoIAware));
    for (auto id : {PolicyId::AoIAware, PolicyId::VAoIAware, PolicyId::QAoIAware, PolicyId::QVAoIAware})
        CHECK(qvaoi(rows, id) < qvaoi(rows, PolicyId::Greedy));
}

TEST_CASE("grid rows are ordered and independent of the job count") {
    const auto base = make(0.8, 0.25, 0.2, 0.05, 4, 20);
    const double pe[] = {0.05, 0.2};
    const double pq[] = {0.2, 0.4};
    ExperimentOptions serial;
    ExperimentOptions threaded;
    threaded.jobs = 3;
    const auto a = compare_grid(base, pe, pq, kAllPolicies, serial);
    const auto b = compare_grid(base, pe, pq, kAllPolicies, threaded);
    REQUIRE(a.size() == 20);
    REQUIRE(b.size() == 20);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].params == b[i].params);
        CHECK(a[i].policy == b[i].policy);
        CHECK(a[i].cs == b[i].cs);
    }
    CHECK(a[0].params.energy_prob() == 0.05);
    CHECK(a[5].params.query_prob() == 0.4);
    CHECK(a[10].params.energy_prob() == 0.2);
    CHECK(a[4].policy == PolicyId::QVAoIAware);
}

TEST_CASE("oversized chains fall back to simulation") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    ExperimentOptions opts;
    opts.exact_limit = 10;
    opts.sim.horizon = 200'000;
    opts.sim.warmup = 1000;
    opts.reps = 5;
    const PolicyId set[] = {PolicyId::Greedy};
    const auto rows = compare_policies(p, set, opts);
    REQUIRE(rows[0].ok);
    CHECK(rows[0].mode == EvalMode::Simulated);
    CHECK(rows[0].qvaoi_half_width > 0);
    const double exact = evaluate_policy_exact(p, MetricKind::QVAoI, greedy_policy(p));
    CHECK(std::abs(rows[0].cs[3] - exact) < 3 * rows[0].qvaoi_half_width + 1e-3);
    const auto again = compare_policies(p, set, opts);
    CHECK(again[0].cs == rows[0].cs);
}

TEST_CASE("failed solves are recorded per row") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    ExperimentOptions opts;
    opts.solve.max_iter = 2;
    const auto rows = compare_policies(p, kAllPolicies, opts);
    CHECK(rows[0].ok);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK_FALSE(rows[i].ok);
        CHECK(rows[i].error.find("NotConverged") == 0);
        CHECK(std::isnan(rows[i].cs[3]));
    }
    std::ostringstream csv;
    write_compare_csv(csv, {}, rows);
    const auto lines = data_lines(csv.str());
    REQUIRE(lines.size() == 6);
    const auto columns = textio::split(lines[0], ',').size();
    for (const auto& l : lines) CHECK(textio::split(l, ',').size() == columns);
    CHECK(lines[2].find(",failed,") != std::string::npos);
}

TEST_CASE("transmission regions") {
    SUBCASE("greedy transmits exactly when charged") {
        const auto map = action_map(make(0.8, 0.25, 0.3, 0.2, 4, 20), PolicyId::Greedy);
        for (int m = 0; m <= 20; ++m)
            for (int b = 0; b <= 4; ++b) CHECK((map.at(m, b) == Action::Transmit) == (b >= 1));
        CHECK(map.thresholds.has_value());
    }
    SUBCASE("version-aware regions exclude a zero lag and grow with charging") {
        const auto low = action_map(make(0.8, 0.25, 0.3, 0.05, 10, 100), PolicyId::QVAoIAware);
        const auto high = action_map(make(0.8, 0.25, 0.3, 0.20, 10, 100), PolicyId::QVAoIAware);
        for (const auto* map : {&low, &high}) {
            CHECK(map->metric == MetricKind::QVAoI);
            for (int b = 0; b <= 10; ++b) CHECK(map->at(0, b) == Action::Idle);
        }
        CHECK(region_subset(low, high));
        CHECK_FALSE(region_subset(high, low));
    }
    SUBCASE("maps of different sizes are incomparable") {
        const auto a = action_map(make(0.8, 0.25, 0.3, 0.2, 4, 20), PolicyId::Greedy);
        const auto b = action_map(make(0.8, 0.25, 0.3, 0.2, 4, 21), PolicyId::Greedy);
        CHECK_THROWS_AS(region_subset(a, b), Error);
    }
    SUBCASE("writers") {
        const auto map = action_map(make(0.8, 0.25, 0.3, 0.2, 2, 5), PolicyId::VAoIAware);
        std::ostringstream csv, grid;
        write_action_map_csv(csv, {}, map);
        write_action_map_gnuplot(grid, {}, map);
        CHECK(data_lines(csv.str()).size() == 1 + 6 * 3);
        const auto rows = data_lines(grid.str());
        REQUIRE(rows.size() == 6);
        CHECK(rows[0] == "0 0 0");
    }
}

TEST_CASE("required charging rate") {
    const auto base = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    ChargingOptions opts;
    opts.tol = 1e-4;

    SUBCASE("bracket meets the target at its upper end") {
        const auto r = required_charging_rate(PolicyId::QVAoIAware, 0.5, base, 0.3, opts);
        CHECK(r.rate - r.lower < opts.tol);
        CHECK(r.rate > r.lower);
        for (auto [pe, cost] : r.evaluated) {
            if (pe >= r.rate) CHECK(cost <= 0.5);
            if (pe <= r.lower) CHECK(cost > 0.5);
        }
        CHECK(r.evaluated.front().first == 1.0);
    }
    SUBCASE("greedy relative to itself is one") {
        const auto g = required_charging_rate(PolicyId::Greedy, 0.5, base, 0.3, opts);
        const auto ratio = charging_ratio(g, g);
        CHECK(ratio.value == 1.0);
        CHECK(ratio.lower <= 1.0);
        CHECK(ratio.upper >= 1.0);
    }
    SUBCASE("the solved policy never needs more energy than greedy") {
        for (double target : {0.3, 0.6, 1.0}) {
            const auto a = required_charging_rate(PolicyId::QVAoIAware, target, base, 0.3, opts);
            const auto g = required_charging_rate(PolicyId::Greedy, target, base, 0.3, opts);
            CHECK(a.rate <= g.rate);
        }
    }
    SUBCASE("easier targets need less energy") {
        double previous = 2;
        for (double target : {0.3, 0.5, 0.8, 1.2}) {
            const auto r = required_charging_rate(PolicyId::QVAoIAware, target, base, 0.3, opts);
            CHECK(r.rate <= previous);
            previous = r.rate;
        }
    }
    SUBCASE("a vacuous target needs almost no energy") {
        const auto r = required_charging_rate(PolicyId::Greedy, 20.0, base, 0.3, opts);
        CHECK(r.lower == 0.0);
        CHECK(r.rate < opts.tol);
    }
    SUBCASE("unreachable targets and bad tolerances") {
        try {
            required_charging_rate(PolicyId::Greedy, 0.01, base, 0.3, opts);
            FAIL("expected TargetUnreachable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TargetUnreachable);
        }
        ChargingOptions bad;
        bad.tol = 0;
        CHECK_THROWS_AS(required_charging_rate(PolicyId::Greedy, 1.0, base, 0.3, bad), Error);
    }
}

TEST_CASE("charging sweep") {
    const auto base = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    const double pq[] = {0.1, 0.3};
    const double targets[] = {0.5, 0.01};
    const PolicyId set[] = {PolicyId::QVAoIAware};
    ChargingOptions opts;
    opts.tol = 1e-3;
    const auto rows = charging_sweep(base, pq, targets, set, opts, 2);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].policy == PolicyId::Greedy);
    CHECK(rows[1].policy == PolicyId::QVAoIAware);
    CHECK(rows[0].ratio.value == 1.0);
    CHECK(rows[1].ok);
    CHECK(rows[1].ratio.value <= 1.0);
    CHECK(rows[2].p_q == 0.3);
    for (std::size_t i = 4; i < 8; ++i) {
        CHECK_FALSE(rows[i].ok);
        CHECK(std::isnan(rows[i].ratio.value));
    }
    std::ostringstream csv, plot;
    write_charging_csv(csv, {}, rows);
    write_charging_gnuplot(plot, {}, rows);
    CHECK(data_lines(csv.str()).size() == 9);
    const auto series = data_lines(plot.str());
    REQUIRE(series.size() == 4);
    CHECK(textio::split_ws(series[0]).size() == 4);
}

TEST_CASE("one-parameter sweeps") {
    const auto fixed = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    SweepSpec spec{"p_e", {0.05, 0.1, 0.2}, fixed, {PolicyId::Greedy, PolicyId::VAoIAware}, EvalMode::Exact};
    const auto rows = run_sweep(spec);
    REQUIRE(rows.size() == 6);
    CHECK(rows[2].params.energy_prob() == 0.1);
    CHECK(rows[3].policy == PolicyId::VAoIAware);
    // More energy never hurts greedy.
    CHECK(rows[0].cs[1] > rows[2].cs[1]);
    CHECK(rows[2].cs[1] > rows[4].cs[1]);

    auto bad = spec;
    bad.values = {};
    CHECK_THROWS_AS(validate_sweep(bad), Error);
    bad.values = {0.1, 0.1};
    CHECK_THROWS_AS(validate_sweep(bad), Error);
    bad = spec;
    bad.parameter = "B";
    CHECK_THROWS_AS(validate_sweep(bad), Error);
    CHECK(with_parameter(fixed, "p_s", 0.5).success_prob() == 0.5);
}

TEST_CASE("experiment header records what a rerun needs") {
    const auto p = make(0.8, 0.25, 0.3, 0.2, 4, 20);
    ExperimentOptions opts;
    opts.sim.seed = 77;
    const auto h = experiment_header("compare", p, opts);
    CHECK(header_require(h, "experiment") == "compare");
    CHECK(header_require(h, "seed") == "77");
    CHECK(header_require(h, "mode") == "exact");
    CHECK(params_from_header(h) == p);
    CHECK(header_value(h, "tool") != nullptr);

    const double pe[] = {0.2};
    const double pq[] = {0.2, 0.4};
    const auto rows = compare_grid(p, pe, pq, kAllPolicies);
    std::ostringstream plot;
    write_compare_gnuplot(plot, h, rows);
    const auto lines = data_lines(plot.str());
    REQUIRE(lines.size() == 5);
    CHECK(textio::split_ws(lines[0]).size() == 1 + 2 * 2);
    CHECK(lines[0].rfind("Greedy ", 0) == 0);
}
