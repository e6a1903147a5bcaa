#include "semsched/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "semsched/metrics.hpp"
#include "semsched/textio.hpp"

namespace semsched {

std::vector<AgentState> build_state_space(const SystemParams& params) {
    const StateIndex space(params);
    std::vector<AgentState> states;
    states.reserve(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) states.push_back(space.state(i));
    return states;
}

std::vector<TransitionEntry> transition(const SystemParams& params, MetricKind kind, const AgentState& s,
                                        Action a) {
    const StateIndex space(params);
    if (!space.contains(s)) throw Error(ErrorCode::StateOutOfRange, "transition from a state outside the space");
    const bool transmit = a == Action::Transmit;
    if (transmit && s.battery < 1)
        throw Error(ErrorCode::InfeasibleAction, "Transmit requires battery >= 1");

    const double p_s = params.success_prob();
    const double p_e = params.energy_prob();
    const double p_v = params.version_prob();
    const double p_q = params.query_prob();
    const int cap = params.battery_capacity();
    const int dmax = params.delta_max();

    std::vector<TransitionEntry> out;
    auto add = [&](AgentState next, double prob) {
        if (prob <= 0.0) return;
        for (auto& e : out)
            if (e.next == next) {
                e.prob += prob;
                return;
            }
        out.push_back({next, prob});
    };
    for (int success = 0; success <= (transmit ? 1 : 0); ++success) {
        const double ps = transmit ? (success ? p_s : 1.0 - p_s) : 1.0;
        for (int energy = 0; energy <= 1; ++energy) {
            const double pe = energy ? p_e : 1.0 - p_e;
            const int battery = std::min(s.battery - (transmit ? 1 : 0) + energy, cap);
            for (int version = 0; version <= 1; ++version) {
                const double pv = version ? p_v : 1.0 - p_v;
                const bool delivered = success == 1;
                const int metric = version_governed(kind) ? step_vaoi(s.metric, delivered, version == 1, dmax)
                                                          : step_aoi(s.metric, delivered, dmax);
                for (int query = 0; query <= 1; ++query) {
                    const double pq = query ? p_q : 1.0 - p_q;
                    add({metric, battery, query}, ps * pe * pv * pq);
                }
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [&](const auto& x, const auto& y) { return space.index(x.next) < space.index(y.next); });
    return out;
}

std::string policy_label(MetricKind kind) { return std::string(to_string(kind)) + "-aware"; }

namespace {

// Compressed rows of one action's transition matrix.
struct SparseRows {
    std::vector<std::size_t> offset;
    std::vector<std::uint32_t> col;
    std::vector<double> prob;
};

} // namespace

SolveResult rvia_solve(const SystemParams& params, MetricKind kind, const SolveOptions& opts) {
    if (!(opts.tol > 0)) throw Error(ErrorCode::OutOfRange, "tolerance must be positive");
    if (opts.max_iter < 1) throw Error(ErrorCode::OutOfRange, "max_iter must be >= 1");
    const StateIndex space(params);
    const std::size_t n = space.size();
    if (opts.reference_state >= n) throw Error(ErrorCode::StateOutOfRange, "reference state index out of range");

    SparseRows rows[2];
    std::vector<double> cost(n);
    for (auto& r : rows) r.offset.assign(1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = space.state(i);
        cost[i] = static_cast<double>(stage_cost(kind, s.metric, s.query == 1));
        for (int a = 0; a <= 1; ++a) {
            auto& r = rows[a];
            if (a == 1 && s.battery >= 1) {
                for (const auto& e : transition(params, kind, s, Action::Transmit)) {
                    r.col.push_back(static_cast<std::uint32_t>(space.index(e.next)));
                    r.prob.push_back(e.prob);
                }
            } else if (a == 0) {
                for (const auto& e : transition(params, kind, s, Action::Idle)) {
                    r.col.push_back(static_cast<std::uint32_t>(space.index(e.next)));
                    r.prob.push_back(e.prob);
                }
            }
            r.offset.push_back(r.col.size());
        }
    }
    auto expect = [&](const SparseRows& r, std::size_t i, const std::vector<double>& h) {
        double acc = 0;
        for (auto k = r.offset[i]; k < r.offset[i + 1]; ++k) acc += r.prob[k] * h[r.col[k]];
        return acc;
    };
    auto feasible = [&](std::size_t i) { return rows[1].offset[i + 1] > rows[1].offset[i]; };

    std::vector<double> h(n, 0.0), next(n), q_idle(n), q_tx(n);
    double gain = 0;
    double span = std::numeric_limits<double>::infinity();
    long long it = 0;
    while (it < opts.max_iter) {
        ++it;
        for (std::size_t i = 0; i < n; ++i) {
            q_idle[i] = cost[i] + expect(rows[0], i, h);
            q_tx[i] = feasible(i) ? cost[i] + expect(rows[1], i, h) : std::numeric_limits<double>::infinity();
            next[i] = std::min(q_idle[i], q_tx[i]);
        }
        gain = next[opts.reference_state];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < n; ++i) {
            next[i] -= gain;
            const double d = next[i] - h[i];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        span = hi - lo;
        h.swap(next);
        if (span < opts.tol) break;
    }

    std::vector<Action> actions(n, Action::Idle);
    for (std::size_t i = 0; i < n; ++i) {
        if (!feasible(i)) continue;
        const double scale = std::max(1.0, std::abs(q_idle[i]));
        if (q_tx[i] < q_idle[i] - opts.tie_tol * scale) actions[i] = Action::Transmit;
    }
    SolveResult result{kind,
                       params,
                       gain,
                       std::move(h),
                       PolicyTable(params, kind, policy_label(kind), std::move(actions)),
                       it,
                       span,
                       span < opts.tol};
    return result;
}

namespace {

constexpr const char* kSolveFormat = "semsched-solve-v1";
constexpr const char* kPolicyFormat = "semsched-policy-v1";

void write_rows(std::ostream& out, const PolicyTable& policy, const std::vector<double>* bias) {
    const StateIndex space(policy.params());
    out << "metric battery query action bias\n";
    for (std::size_t i = 0; i < space.size(); ++i) {
        const auto s = space.state(i);
        out << s.metric << ' ' << s.battery << ' ' << s.query << ' ' << static_cast<int>(policy.at(i)) << ' '
            << (bias ? textio::format_double((*bias)[i]) : std::string("0")) << '\n';
    }
}

struct ParsedTable {
    Header header;
    SystemParams params;
    MetricKind kind;
    std::string label;
    std::vector<Action> actions;
    std::vector<double> bias;
};

ParsedTable read_table(std::istream& in) {
    Header header = read_header(in);
    auto params = params_from_header(header);
    const auto kind = parse_kind(header_require(header, "kind"));
    const auto* label = header_value(header, "label");
    const StateIndex space(params);
    std::vector<Action> actions(space.size(), Action::Idle);
    std::vector<double> bias(space.size(), 0.0);
    std::vector<char> seen(space.size(), 0);
    std::string line;
    bool column_header = false;
    while (std::getline(in, line)) {
        auto toks = textio::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (!column_header) {
            if (toks[0] != "metric") throw Error(ErrorCode::Format, "missing column header row");
            column_header = true;
            continue;
        }
        if (toks.size() != 5) throw Error(ErrorCode::Format, "policy row needs 5 columns");
        const AgentState s{static_cast<int>(textio::parse_int(toks[0])), static_cast<int>(textio::parse_int(toks[1])),
                           static_cast<int>(textio::parse_int(toks[2]))};
        if (!space.contains(s)) throw Error(ErrorCode::StateOutOfRange, "policy row outside state space");
        const auto a = textio::parse_int(toks[3]);
        if (a != 0 && a != 1) throw Error(ErrorCode::Format, "action must be 0 or 1");
        const auto i = space.index(s);
        actions[i] = a ? Action::Transmit : Action::Idle;
        bias[i] = textio::parse_double(toks[4]);
        seen[i] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw Error(ErrorCode::Format, "policy file does not cover the full state space");
    return {std::move(header), std::move(params), kind, label ? *label : policy_label(kind), std::move(actions),
            std::move(bias)};
}

} // namespace

void write_solve_result(std::ostream& out, const SolveResult& r) {
    Header header{{"format", kSolveFormat},
                  {"kind", std::string(to_string(r.kind))},
                  {"label", r.policy.label()}};
    for (auto& kv : params_header(r.params)) header.push_back(std::move(kv));
    header.emplace_back("gain", textio::format_double(r.gain));
    header.emplace_back("iterations", std::to_string(r.iterations));
    header.emplace_back("residual_span", textio::format_double(r.residual_span));
    header.emplace_back("converged", r.converged ? "true" : "false");
    write_header(out, header);
    write_rows(out, r.policy, &r.bias);
}

SolveResult read_solve_result(std::istream& in) {
    auto t = read_table(in);
    if (header_require(t.header, "format") != kSolveFormat)
        throw Error(ErrorCode::Format, "not a solve-result file");
    SolveResult r{t.kind,
                  t.params,
                  textio::parse_double(header_require(t.header, "gain")),
                  std::move(t.bias),
                  PolicyTable(t.params, t.kind, t.label, std::move(t.actions)),
                  textio::parse_int(header_require(t.header, "iterations")),
                  textio::parse_double(header_require(t.header, "residual_span")),
                  header_require(t.header, "converged") == "true"};
    return r;
}

void write_policy_table(std::ostream& out, const PolicyTable& policy) {
    Header header{{"format", kPolicyFormat},
                  {"kind", std::string(to_string(policy.kind()))},
                  {"label", policy.label()}};
    for (auto& kv : params_header(policy.params())) header.push_back(std::move(kv));
    write_header(out, header);
    write_rows(out, policy, nullptr);
}

PolicyTable read_policy_table(std::istream& in) {
    auto t = read_table(in);
    const auto& format = header_require(t.header, "format");
    if (format != kSolveFormat && format != kPolicyFormat) throw Error(ErrorCode::Format, "unknown policy file format");
    return PolicyTable(t.params, t.kind, t.label, std::move(t.actions));
}

} // namespace semsched
