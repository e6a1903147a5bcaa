#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semsched/core.hpp"
#include "semsched/mdp.hpp"
#include "semsched/policy.hpp"
#include "semsched/sim.hpp"

namespace semsched {

enum class PolicyId { Greedy, AoIAware, VAoIAware, QAoIAware, QVAoIAware };

inline constexpr PolicyId kAllPolicies[] = {PolicyId::Greedy, PolicyId::AoIAware, PolicyId::VAoIAware,
                                            PolicyId::QAoIAware, PolicyId::QVAoIAware};

/// "Greedy", "AoI-aware", ... Parsing also accepts lower case.
std::string_view to_string(PolicyId id);
PolicyId parse_policy_id(std::string_view text);

/// Greedy is built directly; the aware policies are solved for `params`.
/// Throws NotConverged when the solve does not converge.
PolicyTable make_policy(const SystemParams& params, PolicyId id, const SolveOptions& solve = {});

enum class EvalMode { Exact, Simulated };

std::string_view to_string(EvalMode mode);

struct ExperimentOptions {
    EvalMode mode = EvalMode::Exact;
    /// Exact mode falls back to simulation above this many chain states.
    std::size_t exact_limit = 100'000;
    SimConfig sim{};
    int reps = 10;
    int jobs = 1;
    SolveOptions solve{};
};

/// One (parameter point, policy) evaluation. Failures are recorded, not thrown.
struct CompareRow {
    SystemParams params;
    PolicyId policy;
    bool ok = false;
    std::string error;
    EvalMode mode = EvalMode::Exact;  // what actually produced the numbers
    /// CS averages indexed by MetricKind (gated kinds over all slots).
    std::array<double, 4> cs{};
    /// Simulation half-width of the QVAoI estimate; 0 for exact rows.
    double qvaoi_half_width = 0;
    double monitor_qvaoi = 0;
    double transmit_rate = 0;
};

/// Average QVAoI of every policy at the CS and at the monitor. The monitor
/// adds N * p_v on query slots, i.e. p_q * N * p_v over all slots.
std::vector<CompareRow> compare_policies(const SystemParams& params, std::span<const PolicyId> policies,
                                         const ExperimentOptions& opts = {});

/// Cross product of energy and query rates; rows ordered by p_e, then p_q,
/// then policy, independent of scheduling.
std::vector<CompareRow> compare_grid(const SystemParams& base, std::span<const double> energy_probs,
                                     std::span<const double> query_probs, std::span<const PolicyId> policies,
                                     const ExperimentOptions& opts = {});

/// Decisions over (metric, battery) on the query = 1 slice.
struct ActionMap {
    SystemParams params;
    PolicyId policy;
    MetricKind metric;  // the metric indexing the grid
    std::vector<Action> grid;  // metric-major, battery 0..B
    std::optional<ThresholdPolicy> thresholds;
    std::string warning;  // set when the policy has no threshold structure

    Action at(int metric_value, int battery) const {
        return grid[static_cast<std::size_t>(metric_value) * static_cast<std::size_t>(params.battery_capacity() + 1) +
                    static_cast<std::size_t>(battery)];
    }
};

ActionMap action_map(const PolicyTable& policy, PolicyId id);
ActionMap action_map(const SystemParams& params, PolicyId id, const SolveOptions& solve = {});

/// True when every transmit cell of `inner` also transmits in `outer`.
bool region_subset(const ActionMap& inner, const ActionMap& outer);

struct ChargingOptions {
    double tol = 1e-3;
    MetricKind metric = MetricKind::QVAoI;
    SolveOptions solve{};
};

struct ChargingResult {
    /// Smallest evaluated energy rate meeting the target; the true
    /// threshold lies in (lower, rate].
    double rate = 1;
    double lower = 0;
    /// Evaluated (p_e, average cost) pairs in evaluation order.
    std::vector<std::pair<double, double>> evaluated;
};

/// Bisection on p_e in (0, 1]. `base` supplies everything but p_e and p_q.
/// Throws TargetUnreachable when even p_e = 1 misses the target and
/// MonotonicityViolation when the evaluated costs are not non-increasing
/// in p_e.
ChargingResult required_charging_rate(PolicyId policy, double target, const SystemParams& base, double p_q,
                                      const ChargingOptions& opts = {});

struct Ratio {
    double value = 0;
    double lower = 0;
    double upper = 0;
};

/// rate(policy) / rate(reference), with the bracket propagated through
/// interval division.
Ratio charging_ratio(const ChargingResult& policy, const ChargingResult& reference);

struct ChargingRow {
    double p_q = 0;
    double target = 0;
    PolicyId policy = PolicyId::Greedy;
    bool ok = false;
    std::string error;
    ChargingResult result;
    /// Relative to greedy at the same (p_q, target); NaN when either failed.
    Ratio ratio;
};

/// Every (p_q, target, policy) point. Greedy is always computed as the
/// reference. Points run concurrently; each bisection is sequential.
std::vector<ChargingRow> charging_sweep(const SystemParams& base, std::span<const double> query_probs,
                                        std::span<const double> targets, std::span<const PolicyId> policies,
                                        const ChargingOptions& opts = {}, int jobs = 1);

/// One-parameter sweep of a policy set.
struct SweepSpec {
    std::string parameter;  // p_s, p_v, p_q or p_e
    std::vector<double> values;
    SystemParams fixed;
    std::vector<PolicyId> policies;
    EvalMode mode = EvalMode::Exact;
};

/// Throws OutOfRange on an unknown parameter or a grid that is empty or
/// not strictly increasing.
void validate_sweep(const SweepSpec& spec);
SystemParams with_parameter(const SystemParams& params, std::string_view name, double value);
std::vector<CompareRow> run_sweep(const SweepSpec& spec, ExperimentOptions opts = {});

/// Reproducibility header for experiment outputs: parameters, tool
/// version, evaluation mode and seeds.
Header experiment_header(std::string_view experiment, const SystemParams& params, const ExperimentOptions& opts);

void write_compare_csv(std::ostream& out, const Header& header, const std::vector<CompareRow>& rows);
/// One line per policy; columns are the (p_e, p_q) cells, CS then monitor.
void write_compare_gnuplot(std::ostream& out, const Header& header, const std::vector<CompareRow>& rows);

void write_action_map_csv(std::ostream& out, const Header& header, const ActionMap& map);
/// Matrix layout: one line per metric value, one column per battery level.
void write_action_map_gnuplot(std::ostream& out, const Header& header, const ActionMap& map);

void write_charging_csv(std::ostream& out, const Header& header, const std::vector<ChargingRow>& rows);
/// One line per (target, p_q); one ratio column per policy.
void write_charging_gnuplot(std::ostream& out, const Header& header, const std::vector<ChargingRow>& rows);

} // namespace semsched
