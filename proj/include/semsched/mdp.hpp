#pragma once

#include <iosfwd>
#include <vector>

#include "semsched/core.hpp"
#include "semsched/policy.hpp"

namespace semsched {

struct TransitionEntry {
    AgentState next;
    double prob = 0;
};

/// All (metric, battery, query) triples in canonical order.
std::vector<AgentState> build_state_space(const SystemParams& params);

/// One-slot transition law. Within the slot: pay the stage cost, act
/// (Transmit spends one battery unit whether or not it succeeds), harvest
/// at most one unit (capped at B), the source may generate a version, the
/// metric advances with delivered = Transmit && success, and the next
/// slot's query is drawn. Duplicate successors are merged; entries are
/// sorted by canonical index.
std::vector<TransitionEntry> transition(const SystemParams& params, MetricKind kind, const AgentState& s,
                                        Action a);

struct SolveOptions {
    double tol = 1e-9;
    long long max_iter = 1'000'000;
    std::size_t reference_state = 0;
    /// Actions whose values differ by less than this are tied; ties go to Idle.
    double tie_tol = 1e-12;
};

struct SolveResult {
    MetricKind kind;
    SystemParams params;
    double gain = 0;
    std::vector<double> bias;
    PolicyTable policy;
    long long iterations = 0;
    double residual_span = 0;
    bool converged = false;
};

/// Relative value iteration on the average-cost MDP for `kind`.
/// Non-convergence is reported through `converged`, not thrown.
SolveResult rvia_solve(const SystemParams& params, MetricKind kind, const SolveOptions& opts = {});

std::string policy_label(MetricKind kind);

/// Header block then `metric battery query action bias` rows. Doubles use
/// the shortest round-trip representation, so write(read(x)) is byte-identical.
void write_solve_result(std::ostream& out, const SolveResult& result);
SolveResult read_solve_result(std::istream& in);
/// Policy-only file in the same layout (bias column zero, no gain).
void write_policy_table(std::ostream& out, const PolicyTable& policy);
/// Accepts either a solve-result file or a policy-only file.
PolicyTable read_policy_table(std::istream& in);

} // namespace semsched
