#include "semsched/policy.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "semsched/textio.hpp"

namespace semsched {

PolicyTable::PolicyTable(SystemParams params, MetricKind kind, std::string label, std::vector<Action> actions)
    : params_(std::move(params)), kind_(kind), label_(std::move(label)), actions_(std::move(actions)) {
    const StateIndex space(params_);
    if (actions_.size() != space.size())
        throw Error(ErrorCode::StateOutOfRange, "policy has " + std::to_string(actions_.size()) +
                                                    " entries, state space has " + std::to_string(space.size()));
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        if (actions_[i] == Action::Transmit && space.state(i).battery == 0)
            throw Error(ErrorCode::InfeasibleAction, "policy transmits with empty battery at index " + std::to_string(i));
    }
}

Action PolicyTable::action(const AgentState& s) const {
    const StateIndex space(params_);
    if (!space.contains(s))
        throw Error(ErrorCode::StateOutOfRange, "state (" + std::to_string(s.metric) + ", " +
                                                    std::to_string(s.battery) + ", " + std::to_string(s.query) +
                                                    ") outside policy state space");
    return actions_[space.index(s)];
}

bool PolicyTable::depends_on_metric() const {
    const StateIndex space(params_);
    for (int b = 0; b <= params_.battery_capacity(); ++b)
        for (int q = 0; q <= 1; ++q) {
            const Action first = actions_[space.index({0, b, q})];
            for (int m = 1; m <= params_.delta_max(); ++m)
                if (actions_[space.index({m, b, q})] != first) return true;
        }
    return false;
}

std::size_t PolicyTable::transmit_count() const {
    return static_cast<std::size_t>(std::count(actions_.begin(), actions_.end(), Action::Transmit));
}

ThresholdPolicy::ThresholdPolicy(SystemParams params, MetricKind kind, std::vector<int> thresholds)
    : params_(std::move(params)), kind_(kind), thresholds_(std::move(thresholds)) {
    const auto slices = static_cast<std::size_t>(params_.battery_capacity() + 1) * 2;
    if (thresholds_.size() != slices)
        throw Error(ErrorCode::StateOutOfRange, "threshold policy needs " + std::to_string(slices) + " slices");
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        if (thresholds_[i] < 0 || thresholds_[i] > never())
            throw Error(ErrorCode::StateOutOfRange, "threshold out of [0, delta_max + 1]");
        if (i < 2 && thresholds_[i] != never())
            throw Error(ErrorCode::InfeasibleAction, "empty-battery slice must never transmit");
    }
}

Action ThresholdPolicy::action(const AgentState& s) const {
    if (!StateIndex(params_).contains(s))
        throw Error(ErrorCode::StateOutOfRange, "state outside threshold policy state space");
    return s.metric >= threshold(s.battery, s.query) ? Action::Transmit : Action::Idle;
}

PolicyTable ThresholdPolicy::to_table(std::string label) const {
    const StateIndex space(params_);
    std::vector<Action> actions(space.size());
    for (std::size_t i = 0; i < actions.size(); ++i) actions[i] = action(space.state(i));
    return PolicyTable(params_, kind_, std::move(label), std::move(actions));
}

bool ThresholdPolicy::monotone_in_battery() const {
    for (int q = 0; q <= 1; ++q)
        for (int b = 2; b <= params_.battery_capacity(); ++b)
            if (threshold(b, q) > threshold(b - 1, q)) return false;
    return true;
}

PolicyTable greedy_policy(const SystemParams& params) {
    const StateIndex space(params);
    std::vector<Action> actions(space.size());
    for (std::size_t i = 0; i < actions.size(); ++i)
        actions[i] = space.state(i).battery >= 1 ? Action::Transmit : Action::Idle;
    return PolicyTable(params, MetricKind::VAoI, "Greedy", std::move(actions));
}

PolicyTable idle_policy(const SystemParams& params, MetricKind kind) {
    return PolicyTable(params, kind, "Idle", std::vector<Action>(StateIndex(params).size(), Action::Idle));
}

ThresholdPolicy extract_thresholds(const PolicyTable& policy) {
    const auto& p = policy.params();
    const StateIndex space(p);
    const int never = p.delta_max() + 1;
    std::vector<int> thresholds;
    thresholds.reserve(static_cast<std::size_t>(p.battery_capacity() + 1) * 2);
    for (int b = 0; b <= p.battery_capacity(); ++b) {
        for (int q = 0; q <= 1; ++q) {
            int switch_at = never;
            for (int m = 0; m <= p.delta_max(); ++m) {
                const bool tx = policy.action({m, b, q}) == Action::Transmit;
                if (tx && switch_at == never) switch_at = m;
                if (!tx && switch_at != never)
                    throw Error(ErrorCode::NotThresholdStructured,
                                "slice (battery=" + std::to_string(b) + ", query=" + std::to_string(q) +
                                    ") transmits at metric " + std::to_string(switch_at) +
                                    " but idles at metric " + std::to_string(m));
            }
            thresholds.push_back(switch_at);
        }
    }
    return ThresholdPolicy(p, policy.kind(), std::move(thresholds));
}

Action policy_action(const PolicyTable& policy, const AgentState& s) { return policy.action(s); }
Action policy_action(const ThresholdPolicy& policy, const AgentState& s) { return policy.action(s); }
Action policy_action(const AnyPolicy& policy, const AgentState& s) {
    return std::visit([&](const auto& p) { return p.action(s); }, policy);
}

const SystemParams& policy_params(const AnyPolicy& policy) {
    return std::visit([](const auto& p) -> const SystemParams& { return p.params(); }, policy);
}

void write_thresholds(std::ostream& out, const ThresholdPolicy& policy) {
    Header header{{"format", "semsched-thresholds-v1"}, {"kind", std::string(to_string(policy.kind()))}};
    for (auto& kv : params_header(policy.params())) header.push_back(std::move(kv));
    write_header(out, header);
    for (int b = 0; b <= policy.params().battery_capacity(); ++b)
        for (int q = 0; q <= 1; ++q) out << b << ' ' << q << ' ' << policy.threshold(b, q) << '\n';
}

ThresholdPolicy read_thresholds(std::istream& in) {
    const Header header = read_header(in);
    auto params = params_from_header(header);
    const auto kind = parse_kind(header_require(header, "kind"));
    std::vector<int> thresholds(static_cast<std::size_t>(params.battery_capacity() + 1) * 2, -1);
    std::string line;
    while (std::getline(in, line)) {
        auto toks = textio::split_ws(line);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (toks.size() != 3) throw Error(ErrorCode::Format, "threshold row needs 'b q threshold'");
        const auto b = textio::parse_int(toks[0]);
        const auto q = textio::parse_int(toks[1]);
        if (b < 0 || b > params.battery_capacity() || (q != 0 && q != 1))
            throw Error(ErrorCode::StateOutOfRange, "threshold row slice out of range");
        thresholds[static_cast<std::size_t>(b) * 2 + static_cast<std::size_t>(q)] =
            static_cast<int>(textio::parse_int(toks[2]));
    }
    if (std::find(thresholds.begin(), thresholds.end(), -1) != thresholds.end())
        throw Error(ErrorCode::Format, "threshold file is missing slices");
    return ThresholdPolicy(std::move(params), kind, std::move(thresholds));
}

} // namespace semsched
