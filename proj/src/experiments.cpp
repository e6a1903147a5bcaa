#include "semsched/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "semsched/evaluate.hpp"
#include "semsched/parallel.hpp"
#include "semsched/textio.hpp"

namespace semsched {

using textio::format_double;

std::string_view to_string(PolicyId id) {
    switch (id) {
    case PolicyId::Greedy: return "Greedy";
    case PolicyId::AoIAware: return "AoI-aware";
    case PolicyId::VAoIAware: return "VAoI-aware";
    case PolicyId::QAoIAware: return "QAoI-aware";
    case PolicyId::QVAoIAware: return "QVAoI-aware";
    }
    return "?";
}

PolicyId parse_policy_id(std::string_view text) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    for (auto id : kAllPolicies)
        if (lower(to_string(id)) == lower(text)) return id;
    throw Error(ErrorCode::Format, "unknown policy '" + std::string(text) + "'");
}

std::string_view to_string(EvalMode mode) { return mode == EvalMode::Exact ? "exact" : "simulated"; }

namespace {

MetricKind solved_kind(PolicyId id) {
    switch (id) {
    case PolicyId::AoIAware: return MetricKind::AoI;
    case PolicyId::VAoIAware: return MetricKind::VAoI;
    case PolicyId::QAoIAware: return MetricKind::QAoI;
    default: return MetricKind::QVAoI;
    }
}

std::string csv_safe(std::string text) {
    for (auto& c : text)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return text;
}

std::string number(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

CompareRow evaluate_one(const SystemParams& params, PolicyId id, const ExperimentOptions& opts, int inner_jobs) {
    CompareRow row{params, id, false, {}, EvalMode::Exact, {}, 0, 0, 0};
    try {
        const auto policy = make_policy(params, id, opts.solve);
        const double gate_offset = params.query_prob() * params.relays() * params.version_prob();
        if (opts.mode == EvalMode::Exact) {
            try {
                const auto eval =
                    evaluate_policy(params, policy, {.track_all = true, .max_states = opts.exact_limit});
                row.mode = EvalMode::Exact;
                row.cs = eval.average;
                row.monitor_qvaoi = eval[MetricKind::QVAoI] + gate_offset;
                row.transmit_rate = eval.transmit_rate;
                row.ok = true;
                return row;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::TooLarge) throw;
            }
        }
        const auto sim = replicate(params, policy, opts.sim, opts.reps, inner_jobs);
        row.mode = EvalMode::Simulated;
        for (auto k : kAllKinds) row.cs[static_cast<std::size_t>(k)] = sim[k].mean;
        row.qvaoi_half_width = sim[MetricKind::QVAoI].half_width;
        row.monitor_qvaoi = sim.monitor[static_cast<std::size_t>(MetricKind::QVAoI)].mean;
        row.transmit_rate = sim.transmit_rate.mean;
        row.ok = true;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        row.cs.fill(std::numeric_limits<double>::quiet_NaN());
        row.monitor_qvaoi = row.transmit_rate = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

std::vector<CompareRow> evaluate_points(const std::vector<SystemParams>& points, std::span<const PolicyId> policies,
                                        const ExperimentOptions& opts) {
    const std::size_t n = points.size() * policies.size();
    std::vector<std::optional<CompareRow>> slots(n);
    // A single task gets the worker budget for its replications instead.
    const int inner = n == 1 ? opts.jobs : 1;
    parallel_for(n, opts.jobs, [&](std::size_t t) {
        slots[t] = evaluate_one(points[t / policies.size()], policies[t % policies.size()], opts, inner);
    });
    std::vector<CompareRow> rows;
    rows.reserve(n);
    for (auto& s : slots) rows.push_back(std::move(*s));
    return rows;
}

} // namespace

PolicyTable make_policy(const SystemParams& params, PolicyId id, const SolveOptions& solve) {
    if (id == PolicyId::Greedy) return greedy_policy(params);
    auto result = rvia_solve(params, solved_kind(id), solve);
    if (!result.converged)
        throw Error(ErrorCode::NotConverged, std::string(to_string(id)) + " solve stopped after " +
                                                 std::to_string(result.iterations) + " iterations (span " +
                                                 format_double(result.residual_span) + ")");
    return std::move(result.policy);
}

std::vector<CompareRow> compare_policies(const SystemParams& params, std::span<const PolicyId> policies,
                                         const ExperimentOptions& opts) {
    return evaluate_points({params}, policies, opts);
}

std::vector<CompareRow> compare_grid(const SystemParams& base, std::span<const double> energy_probs,
                                     std::span<const double> query_probs, std::span<const PolicyId> policies,
                                     const ExperimentOptions& opts) {
    std::vector<SystemParams> points;
    for (double p_e : energy_probs)
        for (double p_q : query_probs) points.push_back(base.with_energy_prob(p_e).with_query_prob(p_q));
    return evaluate_points(points, policies, opts);
}

ActionMap action_map(const PolicyTable& policy, PolicyId id) {
    const auto& p = policy.params();
    ActionMap map{p, id, policy.kind(), {}, std::nullopt, {}};
    map.grid.reserve(static_cast<std::size_t>(p.delta_max() + 1) * static_cast<std::size_t>(p.battery_capacity() + 1));
    for (int m = 0; m <= p.delta_max(); ++m)
        for (int b = 0; b <= p.battery_capacity(); ++b) map.grid.push_back(policy.action({m, b, 1}));
    try {
        map.thresholds = extract_thresholds(policy);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NotThresholdStructured) throw;
        map.warning = e.what();
    }
    return map;
}

ActionMap action_map(const SystemParams& params, PolicyId id, const SolveOptions& solve) {
    return action_map(make_policy(params, id, solve), id);
}

bool region_subset(const ActionMap& inner, const ActionMap& outer) {
    if (inner.grid.size() != outer.grid.size())
        throw Error(ErrorCode::OutOfRange, "action maps cover different grids");
    for (std::size_t i = 0; i < inner.grid.size(); ++i)
        if (inner.grid[i] == Action::Transmit && outer.grid[i] != Action::Transmit) return false;
    return true;
}

ChargingResult required_charging_rate(PolicyId policy, double target, const SystemParams& base, double p_q,
                                      const ChargingOptions& opts) {
    if (!(opts.tol > 0)) throw Error(ErrorCode::OutOfRange, "bisection tolerance must be positive");
    const auto at_query = base.with_query_prob(p_q);
    ChargingResult out;
    auto cost_at = [&](double p_e) {
        const auto params = at_query.with_energy_prob(p_e);
        const double cost = evaluate_policy_exact(params, opts.metric, make_policy(params, policy, opts.solve));
        out.evaluated.emplace_back(p_e, cost);
        return cost;
    };
    const double best = cost_at(1.0);
    if (best > target)
        throw Error(ErrorCode::TargetUnreachable, std::string(to_string(policy)) + " reaches only " +
                                                      format_double(best) + " at p_e = 1, target " +
                                                      format_double(target));
    double lo = 0, hi = 1;
    while (hi - lo >= opts.tol) {
        const double mid = 0.5 * (lo + hi);
        (cost_at(mid) <= target ? hi : lo) = mid;
    }
    out.rate = hi;
    out.lower = lo;

    auto sorted = out.evaluated;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const auto [pe0, c0] = sorted[i - 1];
        const auto [pe1, c1] = sorted[i];
        if (c1 > c0 + 1e-9 * std::max(1.0, std::abs(c0)))
            throw Error(ErrorCode::MonotonicityViolation,
                        std::string(to_string(policy)) + " cost rises from " + format_double(c0) + " at p_e = " +
                            format_double(pe0) + " to " + format_double(c1) + " at p_e = " + format_double(pe1));
    }
    return out;
}

Ratio charging_ratio(const ChargingResult& policy, const ChargingResult& reference) {
    Ratio r;
    r.value = policy.rate / reference.rate;
    r.lower = policy.lower / reference.rate;
    r.upper = reference.lower > 0 ? policy.rate / reference.lower : std::numeric_limits<double>::infinity();
    return r;
}

std::vector<ChargingRow> charging_sweep(const SystemParams& base, std::span<const double> query_probs,
                                        std::span<const double> targets, std::span<const PolicyId> policies,
                                        const ChargingOptions& opts, int jobs) {
    std::vector<PolicyId> set;
    for (auto id : kAllPolicies)
        if (id == PolicyId::Greedy || std::find(policies.begin(), policies.end(), id) != policies.end())
            set.push_back(id);
    std::vector<ChargingRow> rows;
    for (double target : targets)
        for (double p_q : query_probs)
            for (auto id : set) {
                ChargingRow row;
                row.p_q = p_q;
                row.target = target;
                row.policy = id;
                rows.push_back(std::move(row));
            }
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        auto& row = rows[i];
        try {
            row.result = required_charging_rate(row.policy, row.target, base, row.p_q, opts);
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t g = 0; g < rows.size(); g += set.size()) {
        const auto& greedy = rows[g];  // Greedy leads every block
        for (std::size_t k = g; k < g + set.size(); ++k) {
            if (rows[k].ok && greedy.ok) rows[k].ratio = charging_ratio(rows[k].result, greedy.result);
            else rows[k].ratio = {nan, nan, nan};
        }
    }
    return rows;
}

SystemParams with_parameter(const SystemParams& params, std::string_view name, double value) {
    auto raw = params.raw();
    if (name == "p_s") raw.p_s = value;
    else if (name == "p_v") raw.p_v = value;
    else if (name == "p_q") raw.p_q = value;
    else if (name == "p_e") raw.p_e = value;
    else throw Error(ErrorCode::OutOfRange, "cannot sweep parameter '" + std::string(name) + "'");
    return validate_params(raw);
}

void validate_sweep(const SweepSpec& spec) {
    if (spec.parameter != "p_s" && spec.parameter != "p_v" && spec.parameter != "p_q" && spec.parameter != "p_e")
        throw Error(ErrorCode::OutOfRange, "cannot sweep parameter '" + spec.parameter + "'");
    if (spec.values.empty()) throw Error(ErrorCode::OutOfRange, "sweep grid is empty");
    for (std::size_t i = 1; i < spec.values.size(); ++i)
        if (!(spec.values[i] > spec.values[i - 1]))
            throw Error(ErrorCode::OutOfRange, "sweep grid must be strictly increasing");
    if (spec.policies.empty()) throw Error(ErrorCode::OutOfRange, "sweep needs at least one policy");
}

std::vector<CompareRow> run_sweep(const SweepSpec& spec, ExperimentOptions opts) {
    validate_sweep(spec);
    opts.mode = spec.mode;
    std::vector<SystemParams> points;
    for (double v : spec.values) points.push_back(with_parameter(spec.fixed, spec.parameter, v));
    return evaluate_points(points, spec.policies, opts);
}

Header experiment_header(std::string_view experiment, const SystemParams& params, const ExperimentOptions& opts) {
    Header h{{"experiment", std::string(experiment)}, {"tool", "semsched " SEMSCHED_VERSION}};
    for (auto& kv : params_header(params)) h.push_back(kv);
    h.emplace_back("mode", std::string(to_string(opts.mode)));
    h.emplace_back("exact_limit", std::to_string(opts.exact_limit));
    h.emplace_back("solve_tol", format_double(opts.solve.tol));
    h.emplace_back("seed", std::to_string(opts.sim.seed));
    h.emplace_back("horizon", std::to_string(opts.sim.horizon));
    h.emplace_back("warmup", std::to_string(opts.sim.warmup));
    h.emplace_back("reps", std::to_string(opts.reps));
    h.emplace_back("seed_derivation", "replication r uses seed+r; streams energy=1 channel=2 version=3 query=4 overlay=5");
    return h;
}

void write_compare_csv(std::ostream& out, const Header& header, const std::vector<CompareRow>& rows) {
    write_header(out, header);
    out << "p_s,p_v,p_q,p_e,B,N,delta_max,policy,mode,status,cs_aoi,cs_vaoi,cs_qaoi,cs_qvaoi,"
           "cs_qvaoi_half_width,monitor_qvaoi,transmit_rate,error\n";
    for (const auto& r : rows) {
        const auto& p = r.params;
        out << format_double(p.success_prob()) << ',' << format_double(p.version_prob()) << ','
            << format_double(p.query_prob()) << ',' << format_double(p.energy_prob()) << ','
            << p.battery_capacity() << ',' << p.relays() << ',' << p.delta_max() << ',' << to_string(r.policy)
            << ',' << to_string(r.mode) << ',' << (r.ok ? "ok" : "failed");
        for (double v : r.cs) out << ',' << number(v);
        out << ',' << number(r.qvaoi_half_width) << ',' << number(r.monitor_qvaoi) << ','
            << number(r.transmit_rate) << ',' << csv_safe(r.error) << '\n';
    }
}

void write_compare_gnuplot(std::ostream& out, const Header& header, const std::vector<CompareRow>& rows) {
    write_header(out, header);
    std::vector<std::pair<double, double>> cells;
    std::vector<PolicyId> order;
    std::map<std::pair<PolicyId, std::pair<double, double>>, const CompareRow*> index;
    for (const auto& r : rows) {
        const std::pair cell{r.params.energy_prob(), r.params.query_prob()};
        if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
        if (std::find(order.begin(), order.end(), r.policy) == order.end()) order.push_back(r.policy);
        index[{r.policy, cell}] = &r;
    }
    out << "# policy";
    for (const auto& [pe, pq] : cells) out << " cs_pe" << format_double(pe) << "_pq" << format_double(pq);
    for (const auto& [pe, pq] : cells) out << " monitor_pe" << format_double(pe) << "_pq" << format_double(pq);
    out << '\n';
    for (auto id : order) {
        out << to_string(id);
        for (const auto& cell : cells) {
            auto it = index.find({id, cell});
            out << ' ' << (it != index.end() && it->second->ok ? number(it->second->cs[3]) : "nan");
        }
        for (const auto& cell : cells) {
            auto it = index.find({id, cell});
            out << ' ' << (it != index.end() && it->second->ok ? number(it->second->monitor_qvaoi) : "nan");
        }
        out << '\n';
    }
}

void write_action_map_csv(std::ostream& out, const Header& header, const ActionMap& map) {
    auto h = header;
    h.emplace_back("policy", std::string(to_string(map.policy)));
    h.emplace_back("metric", std::string(to_string(map.metric)));
    h.emplace_back("query", "1");
    if (!map.warning.empty()) h.emplace_back("warning", map.warning);
    write_header(out, h);
    out << "metric,battery,action\n";
    for (int m = 0; m <= map.params.delta_max(); ++m)
        for (int b = 0; b <= map.params.battery_capacity(); ++b)
            out << m << ',' << b << ',' << static_cast<int>(map.at(m, b)) << '\n';
}

void write_action_map_gnuplot(std::ostream& out, const Header& header, const ActionMap& map) {
    auto h = header;
    h.emplace_back("policy", std::string(to_string(map.policy)));
    h.emplace_back("metric", std::string(to_string(map.metric)));
    h.emplace_back("layout", "row = metric value 0..delta_max, column = battery 0..B, 1 = transmit");
    if (!map.warning.empty()) h.emplace_back("warning", map.warning);
    write_header(out, h);
    for (int m = 0; m <= map.params.delta_max(); ++m) {
        for (int b = 0; b <= map.params.battery_capacity(); ++b)
            out << (b ? " " : "") << static_cast<int>(map.at(m, b));
        out << '\n';
    }
}

void write_charging_csv(std::ostream& out, const Header& header, const std::vector<ChargingRow>& rows) {
    write_header(out, header);
    out << "p_q,target,policy,status,rate,rate_lower,evaluations,ratio,ratio_lower,ratio_upper,error\n";
    for (const auto& r : rows) {
        out << format_double(r.p_q) << ',' << format_double(r.target) << ',' << to_string(r.policy) << ','
            << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) out << number(r.result.rate) << ',' << number(r.result.lower) << ',' << r.result.evaluated.size();
        else out << "nan,nan,0";
        out << ',' << number(r.ratio.value) << ',' << number(r.ratio.lower) << ',' << number(r.ratio.upper) << ','
            << csv_safe(r.error) << '\n';
    }
}

void write_charging_gnuplot(std::ostream& out, const Header& header, const std::vector<ChargingRow>& rows) {
    write_header(out, header);
    std::vector<PolicyId> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.policy) == order.end()) order.push_back(r.policy);
    out << "# target p_q";
    for (auto id : order) out << ' ' << to_string(id);
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); i += order.size()) {
        out << format_double(rows[i].target) << ' ' << format_double(rows[i].p_q);
        for (std::size_t k = 0; k < order.size(); ++k) out << ' ' << number(rows[i + k].ratio.value);
        out << '\n';
    }
}

} // namespace semsched
