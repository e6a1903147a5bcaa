#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "semsched/core.hpp"

namespace semsched {

/// Canonical metric-major enumeration of (metric, battery, query):
/// index = (metric * (B + 1) + battery) * 2 + query.
class StateIndex {
public:
    StateIndex(int delta_max, int battery_capacity) : delta_max_(delta_max), capacity_(battery_capacity) {}
    explicit StateIndex(const SystemParams& p) : StateIndex(p.delta_max(), p.battery_capacity()) {}

    std::size_t size() const {
        return static_cast<std::size_t>(delta_max_ + 1) * static_cast<std::size_t>(capacity_ + 1) * 2;
    }
    bool contains(const AgentState& s) const {
        return s.metric >= 0 && s.metric <= delta_max_ && s.battery >= 0 && s.battery <= capacity_ &&
               (s.query == 0 || s.query == 1);
    }
    std::size_t index(const AgentState& s) const {
        return (static_cast<std::size_t>(s.metric) * static_cast<std::size_t>(capacity_ + 1) +
                static_cast<std::size_t>(s.battery)) * 2 + static_cast<std::size_t>(s.query);
    }
    AgentState state(std::size_t i) const {
        const int query = static_cast<int>(i % 2);
        const auto rest = i / 2;
        return {static_cast<int>(rest / static_cast<std::size_t>(capacity_ + 1)),
                static_cast<int>(rest % static_cast<std::size_t>(capacity_ + 1)), query};
    }
    int delta_max() const { return delta_max_; }
    int battery_capacity() const { return capacity_; }

private:
    int delta_max_;
    int capacity_;
};

/// Stationary deterministic lookup table over the canonical state space.
/// `kind` names the metric whose value indexes the table (AoI for AoI/QAoI,
/// the version lag for VAoI/QVAoI).
class PolicyTable {
public:
    PolicyTable(SystemParams params, MetricKind kind, std::string label, std::vector<Action> actions);

    const SystemParams& params() const { return params_; }
    std::uint64_t params_stamp() const { return params_.stamp(); }
    MetricKind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    const std::vector<Action>& actions() const { return actions_; }
    StateIndex space() const { return StateIndex(params_); }

    Action action(const AgentState& s) const;
    Action at(std::size_t index) const { return actions_[index]; }

    /// False when every (battery, query) slice is constant in the metric;
    /// such a policy can be evaluated without tracking its metric.
    bool depends_on_metric() const;
    std::size_t transmit_count() const;

    friend bool operator==(const PolicyTable& a, const PolicyTable& b) {
        return a.params_ == b.params_ && a.kind_ == b.kind_ && a.actions_ == b.actions_;
    }

private:
    SystemParams params_;
    MetricKind kind_;
    std::string label_;
    std::vector<Action> actions_;
};

/// Per (battery, query) slice: smallest metric value at which the policy
/// transmits. delta_max + 1 means the slice never transmits.
class ThresholdPolicy {
public:
    ThresholdPolicy(SystemParams params, MetricKind kind, std::vector<int> thresholds);

    const SystemParams& params() const { return params_; }
    MetricKind kind() const { return kind_; }
    int never() const { return params_.delta_max() + 1; }
    int threshold(int battery, int query) const {
        return thresholds_[static_cast<std::size_t>(battery) * 2 + static_cast<std::size_t>(query)];
    }
    const std::vector<int>& thresholds() const { return thresholds_; }

    Action action(const AgentState& s) const;
    PolicyTable to_table(std::string label) const;

    /// True when thresholds are non-increasing in battery for each query flag.
    bool monotone_in_battery() const;

    friend bool operator==(const ThresholdPolicy&, const ThresholdPolicy&) = default;

private:
    SystemParams params_;
    MetricKind kind_;
    std::vector<int> thresholds_;
};

PolicyTable greedy_policy(const SystemParams& params);
PolicyTable idle_policy(const SystemParams& params, MetricKind kind = MetricKind::AoI);

/// Throws NotThresholdStructured naming the first offending slice.
ThresholdPolicy extract_thresholds(const PolicyTable& policy);

using AnyPolicy = std::variant<PolicyTable, ThresholdPolicy>;

Action policy_action(const PolicyTable& policy, const AgentState& s);
Action policy_action(const ThresholdPolicy& policy, const AgentState& s);
Action policy_action(const AnyPolicy& policy, const AgentState& s);
const SystemParams& policy_params(const AnyPolicy& policy);

/// `b q threshold` per slice, preceded by `# key = value` header lines.
void write_thresholds(std::ostream& out, const ThresholdPolicy& policy);
ThresholdPolicy read_thresholds(std::istream& in);

} // namespace semsched
