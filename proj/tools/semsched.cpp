// semsched: solve, simulate and reproduce the policy experiments from the
// command line. Exit codes: 0 ok, 1 other failure, 2 configuration or
// usage, 3 solver convergence, 4 policy/parameter stamp mismatch, 5 one or
// more experiment rows failed.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semsched/core.hpp"
#include "semsched/evaluate.hpp"
#include "semsched/experiments.hpp"
#include "semsched/mdp.hpp"
#include "semsched/metrics.hpp"
#include "semsched/policy.hpp"
#include "semsched/sim.hpp"
#include "semsched/textio.hpp"

namespace fs = std::filesystem;
using namespace semsched;
using json = nlohmann::ordered_json;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfig = 2, kConvergence = 3, kStamp = 4, kPartial = 5 };

struct Options {
    std::string config;
    std::vector<std::string> sets;
    std::vector<double> pe;
    std::vector<double> pq;
    std::string kind = "QVAoI";
    std::vector<std::string> policies;
    std::string policy = "greedy";
    long long horizon = 1'000'000;
    long long warmup = 10'000;
    std::uint64_t seed = 1;
    int reps = 10;
    std::vector<double> targets{1.5};
    int jobs = 1;
    std::string out;
    bool gnuplot = false;
    std::string mode = "exact";
    double solve_tol = 1e-9;
    long long max_iter = 1'000'000;
    double bisect_tol = 1e-3;
    std::string events;
};

// Resolution order: defaults, config file, --set, then dedicated flags.
RawParams resolve_raw(const Options& o) {
    RawParams raw;
    if (!o.config.empty()) raw = load_config(o.config, raw);
    for (const auto& kv : o.sets) {
        std::istringstream line(kv);
        try {
            raw = parse_config(line, raw);
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigParse, "--set " + kv + ": " + e.what());
        }
    }
    if (o.pe.size() == 1) raw.p_e = o.pe[0];
    if (o.pq.size() == 1) raw.p_q = o.pq[0];
    return raw;
}

SystemParams resolve(const Options& o) { return validate_params(resolve_raw(o)); }

SimConfig sim_config(const Options& o) {
    SimConfig c;
    c.horizon = o.horizon;
    c.warmup = o.warmup;
    c.seed = o.seed;
    validate_sim_config(c);
    return c;
}

ExperimentOptions experiment_options(const Options& o) {
    ExperimentOptions e;
    if (o.mode == "exact") e.mode = EvalMode::Exact;
    else if (o.mode == "simulated") e.mode = EvalMode::Simulated;
    else throw Error(ErrorCode::ConfigParse, "--mode must be exact or simulated");
    e.sim = sim_config(o);
    e.reps = o.reps;
    e.jobs = o.jobs;
    e.solve.tol = o.solve_tol;
    e.solve.max_iter = o.max_iter;
    return e;
}

std::vector<PolicyId> policy_set(const Options& o, std::vector<PolicyId> fallback) {
    if (o.policies.empty()) return fallback;
    std::vector<PolicyId> out;
    for (const auto& name : o.policies) out.push_back(parse_policy_id(name));
    return out;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Format, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Collects artifacts and writes them, each followed by one manifest
/// describing the whole invocation.
class Run {
public:
    Run(std::string subcommand, std::vector<std::string> argv)
        : subcommand_(std::move(subcommand)), argv_(std::move(argv)), start_(std::chrono::steady_clock::now()) {}

    void emit(const std::string& path, const std::string& contents) {
        if (path.empty()) {
            std::cout << contents;
            return;
        }
        textio::write_file_atomic(path, contents);
        outputs_.push_back(path);
    }

    void finish(const std::string& primary, const SystemParams& params, const json& extra = json::object()) {
        if (primary.empty()) return;
        json m;
        m["subcommand"] = subcommand_;
        m["tool_version"] = SEMSCHED_VERSION;
        m["argv"] = argv_;
        m["params"] = json::object();
        for (const auto& [k, v] : params_header(params)) m["params"][k] = v;
        m["config"] = render_config(params);
        if (seed_)
            m["seeds"] = {{"base", *seed_},
                          {"derivation", "replication r uses base + r"},
                          {"streams", {{"energy", 1}, {"channel", 2}, {"version", 3}, {"query", 4}, {"overlay", 5}}}};
        m["outputs"] = outputs_;
        for (auto& [k, v] : extra.items()) m[k] = v;
        m["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        textio::write_file_atomic(primary + ".manifest.json", m.dump(2) + "\n");
    }

    void seed(std::uint64_t s) { seed_ = s; }

private:
    std::string subcommand_;
    std::vector<std::string> argv_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> outputs_;
    std::optional<std::uint64_t> seed_;
};

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + textio::format_double(values[i]);
    return out;
}

std::string sibling(const std::string& out, const std::string& suffix) {
    fs::path p(out);
    const auto stem = p.stem().string();
    const auto ext = p.extension().string();
    return (p.parent_path() / (stem + suffix + ext)).string();
}

int cmd_solve(const Options& o, Run& run) {
    const auto params = resolve(o);
    SolveOptions so;
    so.tol = o.solve_tol;
    so.max_iter = o.max_iter;
    const auto kind = parse_kind(o.kind);
    const auto result = rvia_solve(params, kind, so);
    if (!result.converged) {
        std::cerr << "error: " << to_string(kind) << " solve did not converge after " << result.iterations
                  << " iterations (residual span " << textio::format_double(result.residual_span) << ")\n";
        return kConvergence;
    }
    std::ostringstream table;
    write_solve_result(table, result);
    run.emit(o.out, table.str());
    std::string warning;
    if (!o.out.empty()) {
        try {
            std::ostringstream t;
            write_thresholds(t, extract_thresholds(result.policy));
            run.emit(o.out + ".thresholds", t.str());
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NotThresholdStructured) throw;
            warning = e.what();
            std::cerr << "warning: " << warning << '\n';
        }
    }
    std::cerr << to_string(kind) << " gain " << textio::format_double(result.gain) << " after "
              << result.iterations << " iterations\n";
    run.finish(o.out, params,
               {{"kind", std::string(to_string(kind))}, {"gain", result.gain}, {"iterations", result.iterations},
                {"threshold_warning", warning}});
    return kOk;
}

AnyPolicy load_policy(const Options& o, const SystemParams& params) {
    if (o.policy == "greedy" || o.policy == "Greedy") return greedy_policy(params);
    const auto text = read_file(o.policy);
    std::istringstream in(text);
    if (text.find("semsched-thresholds-v1") != std::string::npos) return read_thresholds(in);
    return read_policy_table(in);
}

int cmd_simulate(const Options& o, Run& run) {
    const auto params = resolve(o);
    const auto cfg = sim_config(o);
    const auto policy = load_policy(o, params);
    const std::string id = o.policy == "greedy" || o.policy == "Greedy" ? "Greedy" : fs::path(o.policy).filename().string();
    run.seed(cfg.seed);

    std::vector<SimSummary> runs;
    std::vector<MonitorAverages> monitors;
    json aggregate = json::object();
    if (o.reps <= 1) {
        SimConfig c = cfg;
        c.record_trace = true;
        auto s = simulate(params, policy, c);
        monitors.push_back(monitor_metrics(s, s.trace, params, c.seed));
        runs.push_back(std::move(s));
    } else {
        auto r = replicate(params, policy, cfg, o.reps, o.jobs);
        for (auto k : kAllKinds)
            aggregate[std::string(to_string(k))] = {{"mean", r[k].mean}, {"half_width", r[k].half_width}};
        runs = std::move(r.runs);
        monitors = std::move(r.monitors);
    }
    std::ostringstream csv;
    Header h{{"experiment", "simulate"}, {"tool", "semsched " SEMSCHED_VERSION}, {"policy", id}};
    for (auto& kv : params_header(params)) h.push_back(kv);
    h.emplace_back("reps", std::to_string(runs.size()));
    write_header(csv, h);
    csv << sim_csv_header() << '\n';
    for (std::size_t r = 0; r < runs.size(); ++r) {
        SimConfig c = cfg;
        c.seed = cfg.seed + r;
        csv << sim_csv_row(params, id, c, runs[r], monitors[r]) << '\n';
    }
    run.emit(o.out, csv.str());
    run.finish(o.out, params, {{"policy", id}, {"horizon", cfg.horizon}, {"warmup", cfg.warmup}, {"aggregate", aggregate}});
    return kOk;
}

int cmd_trace(const Options& o, Run& run) {
    const auto params = resolve(o);
    std::vector<SlotEvents> events;
    if (o.events.empty() || o.events == "-") {
        events = read_events(std::cin);
    } else {
        std::istringstream in(read_file(o.events));
        events = read_events(in);
    }
    const auto series = evolve_trace(events, params.delta_max());
    std::ostringstream out;
    write_trace(out, events, series);
    run.emit(o.out, out.str());
    run.finish(o.out, params, {{"events", o.events}, {"slots", events.size()}});
    return kOk;
}

int cmd_compare(const Options& o, Run& run) {
    const auto base = validate_params(resolve_raw(o));
    const auto opts = experiment_options(o);
    const std::vector<double> pe = o.pe.empty() ? std::vector<double>{0.05, 0.20} : o.pe;
    const std::vector<double> pq = o.pq.empty() ? std::vector<double>{0.2, 0.4} : o.pq;
    const auto policies = policy_set(o, {std::begin(kAllPolicies), std::end(kAllPolicies)});
    run.seed(opts.sim.seed);
    const auto rows = compare_grid(base, pe, pq, policies, opts);
    auto header = experiment_header("compare", base, opts);
    header.emplace_back("grid_p_e", join(pe));
    header.emplace_back("grid_p_q", join(pq));
    std::ostringstream csv;
    if (o.gnuplot) write_compare_gnuplot(csv, header, rows);
    else write_compare_csv(csv, header, rows);
    run.emit(o.out, csv.str());
    std::size_t failed = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            ++failed;
            std::cerr << "row failed: " << to_string(r.policy) << " at p_e=" << r.params.energy_prob()
                      << " p_q=" << r.params.query_prob() << ": " << r.error << '\n';
        }
    run.finish(o.out, base, {{"rows", rows.size()}, {"failed_rows", failed}});
    return failed ? kPartial : kOk;
}

int cmd_regions(const Options& o, Run& run) {
    const auto base = validate_params(resolve_raw(o));
    const auto opts = experiment_options(o);
    PolicyId id = PolicyId::QVAoIAware;
    if (!o.policies.empty()) id = parse_policy_id(o.policies.front());
    else id = parse_policy_id(o.kind + "-aware");
    const std::vector<double> pe = o.pe.empty() ? std::vector<double>{base.energy_prob()} : o.pe;
    std::size_t failed = 0;
    json maps = json::array();
    for (double p_e : pe) {
        const auto params = base.with_energy_prob(p_e);
        const auto suffix = "_pe" + textio::format_double(p_e);
        try {
            const auto map = action_map(params, id, opts.solve);
            const auto header = experiment_header("regions", params, opts);
            std::ostringstream grid;
            if (o.gnuplot) write_action_map_gnuplot(grid, header, map);
            else write_action_map_csv(grid, header, map);
            const auto path = o.out.empty() ? std::string() : sibling(o.out, suffix);
            if (o.out.empty()) std::cout << "# p_e = " << textio::format_double(p_e) << '\n';
            run.emit(path, grid.str());
            if (map.thresholds && !o.out.empty()) {
                std::ostringstream t;
                write_thresholds(t, *map.thresholds);
                run.emit(path + ".thresholds", t.str());
            }
            if (!map.warning.empty()) std::cerr << "warning: p_e=" << p_e << ": " << map.warning << '\n';
            maps.push_back({{"p_e", p_e}, {"threshold_structured", map.thresholds.has_value()}, {"warning", map.warning}});
        } catch (const Error& e) {
            ++failed;
            std::cerr << "row failed: p_e=" << p_e << ": " << e.what() << '\n';
            maps.push_back({{"p_e", p_e}, {"error", e.what()}});
        }
    }
    run.finish(o.out, base, {{"policy", std::string(to_string(id))}, {"maps", maps}});
    return failed ? kPartial : kOk;
}

int cmd_sweep(const Options& o, Run& run) {
    const auto base = validate_params(resolve_raw(o));
    const std::vector<double> pq = o.pq.empty() ? std::vector<double>{0.1, 0.2, 0.3, 0.4} : o.pq;
    const auto policies = policy_set(o, {PolicyId::QVAoIAware});
    ChargingOptions copts;
    copts.tol = o.bisect_tol;
    copts.solve.tol = o.solve_tol;
    copts.solve.max_iter = o.max_iter;
    const auto rows = charging_sweep(base, pq, o.targets, policies, copts, o.jobs);
    auto header = experiment_header("sweep", base, experiment_options(o));
    header.emplace_back("grid_p_q", join(pq));
    header.emplace_back("targets", join(o.targets));
    header.emplace_back("bisect_tol", textio::format_double(copts.tol));
    header.emplace_back("metric", "QVAoI");
    std::ostringstream csv;
    if (o.gnuplot) write_charging_gnuplot(csv, header, rows);
    else write_charging_csv(csv, header, rows);
    run.emit(o.out, csv.str());
    std::size_t failed = 0;
    for (const auto& r : rows)
        if (!r.ok) {
            ++failed;
            std::cerr << "row failed: " << to_string(r.policy) << " at p_q=" << r.p_q << " target=" << r.target
                      << ": " << r.error << '\n';
        }
    run.finish(o.out, base, {{"rows", rows.size()}, {"failed_rows", failed}});
    return failed ? kPartial : kOk;
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
    case ErrorCode::ConfigParse:
    case ErrorCode::OutOfRange:
    case ErrorCode::NonPositiveCapacity:
    case ErrorCode::TruncationTooTight: return kConfig;
    case ErrorCode::NotConverged: return kConvergence;
    case ErrorCode::MismatchedStamp: return kStamp;
    default: return kFailure;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantics-aware transmission scheduling: solver, simulator and experiments", "semsched"};
    app.set_version_flag("--version", SEMSCHED_VERSION);
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Flat key = value parameter file")->check(CLI::ExistingFile);
        sub->add_option("--set", o.sets, "Override one config key (key=value); repeatable");
        sub->add_option("--out", o.out, "Output path (stdout when omitted)");
        sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--solve-tol", o.solve_tol, "Relative value iteration span tolerance");
        sub->add_option("--max-iter", o.max_iter, "Relative value iteration sweep limit")->check(CLI::PositiveNumber);
    };
    auto sim_flags = [&](CLI::App* sub) {
        sub->add_option("--horizon", o.horizon, "Slots per run");
        sub->add_option("--warmup", o.warmup, "Slots excluded from averages");
        sub->add_option("--seed", o.seed, "Base seed");
        sub->add_option("--reps", o.reps, "Replications");
    };

    auto* solve = app.add_subcommand("solve", "Solve the average-cost MDP for one metric");
    common(solve);
    solve->add_option("--kind", o.kind, "AoI, VAoI, QAoI or QVAoI")->required();
    solve->add_option("--pe", o.pe, "Energy arrival probability")->expected(1);
    solve->add_option("--pq", o.pq, "Query probability")->expected(1);

    auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    common(simulate_cmd);
    sim_flags(simulate_cmd);
    simulate_cmd->add_option("--policy", o.policy, "'greedy' or a policy/threshold file");
    simulate_cmd->add_option("--pe", o.pe, "Energy arrival probability")->expected(1);
    simulate_cmd->add_option("--pq", o.pq, "Query probability")->expected(1);

    auto* trace = app.add_subcommand("trace", "Replay a delivered/new_version/query event table");
    common(trace);
    trace->add_option("events", o.events, "Event file ('-' or omitted reads stdin)");

    auto* compare = app.add_subcommand("compare", "Policy comparison over energy and query rates");
    common(compare);
    sim_flags(compare);
    compare->add_option("--pe", o.pe, "Energy rates")->delimiter(',');
    compare->add_option("--pq", o.pq, "Query rates")->delimiter(',');
    compare->add_option("--policy", o.policies, "Policies to include")->delimiter(',');
    compare->add_option("--mode", o.mode, "exact or simulated");
    compare->add_flag("--emit-gnuplot-ready", o.gnuplot, "One series per column");

    auto* regions = app.add_subcommand("regions", "Transmission regions on the query slice");
    common(regions);
    regions->add_option("--kind", o.kind, "Metric of the solved policy");
    regions->add_option("--policy", o.policies, "Policy (overrides --kind), e.g. Greedy");
    regions->add_option("--pe", o.pe, "Energy rates")->delimiter(',');
    regions->add_option("--pq", o.pq, "Query probability")->expected(1);
    regions->add_flag("--emit-gnuplot-ready", o.gnuplot, "Matrix layout");

    auto* sweep = app.add_subcommand("sweep", "Required energy rate relative to greedy");
    common(sweep);
    sweep->add_option("--target", o.targets, "Target average QVAoI values")->delimiter(',');
    sweep->add_option("--pq", o.pq, "Query rates")->delimiter(',');
    sweep->add_option("--policy", o.policies, "Policies besides greedy")->delimiter(',');
    sweep->add_option("--bisect-tol", o.bisect_tol, "Bracket width on the energy rate");
    sweep->add_flag("--emit-gnuplot-ready", o.gnuplot, "One series per column");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    std::vector<std::string> args(argv, argv + argc);
    auto* sub = app.get_subcommands().front();
    Run run(sub->get_name(), args);
    try {
        if (sub == solve) return cmd_solve(o, run);
        if (sub == simulate_cmd) return cmd_simulate(o, run);
        if (sub == trace) return cmd_trace(o, run);
        if (sub == compare) return cmd_compare(o, run);
        if (sub == regions) return cmd_regions(o, run);
        return cmd_sweep(o, run);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
}
