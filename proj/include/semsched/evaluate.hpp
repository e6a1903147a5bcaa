#pragma once

#include <array>
#include <cstddef>
#include <utility>

#include "semsched/core.hpp"
#include "semsched/policy.hpp"

namespace semsched {

/// Long-run behaviour of a fixed policy, computed from the stationary
/// distribution of the chain it induces from the simulator's start state
/// (AoI = delta_max, VAoI = 0, battery = B).
struct PolicyEvaluation {
    /// Indexed by MetricKind; query-gated kinds are averaged over all slots.
    std::array<double, 4> average{};
    double transmit_rate = 0;  // attempts per slot
    double delivery_rate = 0;  // successful attempts per slot
    std::size_t chain_states = 0;
    std::size_t recurrent_states = 0;

    double operator[](MetricKind k) const { return average[static_cast<std::size_t>(k)]; }
};

struct EvaluateOptions {
    /// Track both AoI and VAoI even when the policy and costs need only one.
    bool track_all = false;
    /// Upper bound on reachable chain states; TooLarge beyond it.
    std::size_t max_states = 2'000'000;
};

/// Throws MultichainPolicy when more than one closed class is reachable
/// from the start state, SingularSolve when the stationary system fails.
PolicyEvaluation evaluate_policy(const SystemParams& params, const PolicyTable& policy,
                                 const EvaluateOptions& opts = {.track_all = true});

/// Average stage cost of `kind` under `policy`. Only the metrics the
/// policy and the cost actually depend on are tracked.
double evaluate_policy_exact(const SystemParams& params, MetricKind kind, const PolicyTable& policy);

/// Number of states the evaluator's chain would have, without solving it.
std::size_t evaluation_chain_size(const SystemParams& params, MetricKind kind, const PolicyTable& policy);

struct BruteForceResult {
    PolicyTable policy;
    double cost = 0;
    std::size_t evaluated = 0;
    std::size_t skipped_multichain = 0;
};

/// Exhaustive search over stationary deterministic feasible policies.
/// TooLarge when the state space exceeds max_states or there are more
/// than 24 states with a real choice.
BruteForceResult enumerate_optimal_bruteforce(const SystemParams& params, MetricKind kind,
                                              std::size_t max_states = 64);

} // namespace semsched
