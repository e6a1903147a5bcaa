#include "semsched/evaluate.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "semsched/metrics.hpp"

namespace semsched {

namespace {

struct Node {
    int aoi;
    int vaoi;
    int battery;
};

// Policy-induced chain over (AoI, VAoI, battery). The query flag is not a
// chain coordinate: the current query is a fresh Bernoulli draw independent
// of everything else in the slot, so the action is mixed over it and the
// stationary law factors as mu(aoi, vaoi, battery) x Bernoulli(p_q).
class PolicyChain {
public:
    PolicyChain(const SystemParams& params, const PolicyTable& policy, bool track_aoi, bool track_vaoi,
                std::size_t max_states)
        : params_(params), policy_(policy), track_aoi_(track_aoi), track_vaoi_(track_vaoi),
          governed_by_version_(version_governed(policy.kind())), metric_free_(!policy.depends_on_metric()) {
        explore(max_states);
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::size_t>& offset() const { return offset_; }
    const std::vector<std::uint32_t>& col() const { return col_; }
    const std::vector<double>& prob() const { return prob_; }
    /// Probability of attempting a transmission from node i.
    double transmit_prob(std::size_t i) const { return transmit_[i]; }

private:
    std::uint64_t key(const Node& n) const {
        const auto d = static_cast<std::uint64_t>(params_.delta_max() + 1);
        const auto b = static_cast<std::uint64_t>(params_.battery_capacity() + 1);
        return (static_cast<std::uint64_t>(n.aoi) * d + static_cast<std::uint64_t>(n.vaoi)) * b +
               static_cast<std::uint64_t>(n.battery);
    }

    std::uint32_t intern(const Node& n, std::size_t max_states) {
        auto [it, inserted] = ids_.try_emplace(key(n), static_cast<std::uint32_t>(nodes_.size()));
        if (inserted) {
            if (nodes_.size() >= max_states)
                throw Error(ErrorCode::TooLarge, "policy chain exceeds " + std::to_string(max_states) + " states");
            nodes_.push_back(n);
        }
        return it->second;
    }

    Action act(const Node& n, int query) const {
        if (n.battery == 0) return Action::Idle;
        int metric = governed_by_version_ ? n.vaoi : n.aoi;
        if (metric_free_) metric = 0;
        return policy_.action({metric, n.battery, query});
    }

    void explore(std::size_t max_states) {
        const int dmax = params_.delta_max();
        const int cap = params_.battery_capacity();
        const double p_s = params_.success_prob(), p_e = params_.energy_prob(), p_v = params_.version_prob(),
                     p_q = params_.query_prob();
        intern({track_aoi_ ? dmax : 0, 0, cap}, max_states);
        offset_.push_back(0);
        std::vector<std::pair<std::uint32_t, double>> row;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node x = nodes_[i];
            row.clear();
            double tx_prob = 0;
            for (int query = 0; query <= 1; ++query) {
                const double wq = query ? p_q : 1.0 - p_q;
                if (wq <= 0) continue;
                const bool transmit = act(x, query) == Action::Transmit;
                if (transmit) tx_prob += wq;
                for (int success = 0; success <= (transmit ? 1 : 0); ++success) {
                    const double ws = transmit ? (success ? p_s : 1.0 - p_s) : 1.0;
                    for (int energy = 0; energy <= 1; ++energy) {
                        const double we = energy ? p_e : 1.0 - p_e;
                        for (int version = 0; version <= 1; ++version) {
                            const double wv = version ? p_v : 1.0 - p_v;
                            const double w = wq * ws * we * wv;
                            if (w <= 0) continue;
                            const bool delivered = success == 1;
                            Node y{track_aoi_ ? step_aoi(x.aoi, delivered, dmax) : 0,
                                   track_vaoi_ ? step_vaoi(x.vaoi, delivered, version == 1, dmax) : 0,
                                   std::min(x.battery - (transmit ? 1 : 0) + energy, cap)};
                            const auto j = intern(y, max_states);
                            auto hit = std::find_if(row.begin(), row.end(), [&](auto& e) { return e.first == j; });
                            if (hit == row.end()) row.emplace_back(j, w);
                            else hit->second += w;
                        }
                    }
                }
            }
            std::sort(row.begin(), row.end());
            for (auto& [j, w] : row) {
                col_.push_back(j);
                prob_.push_back(w);
            }
            offset_.push_back(col_.size());
            transmit_.push_back(tx_prob);
        }
    }

    const SystemParams& params_;
    const PolicyTable& policy_;
    bool track_aoi_;
    bool track_vaoi_;
    bool governed_by_version_;
    bool metric_free_;
    std::unordered_map<std::uint64_t, std::uint32_t> ids_;
    std::vector<Node> nodes_;
    std::vector<std::size_t> offset_;
    std::vector<std::uint32_t> col_;
    std::vector<double> prob_;
    std::vector<double> transmit_;
};

// Iterative Tarjan; returns the component id of every node and the number
// of components.
std::pair<std::vector<std::uint32_t>, std::uint32_t> strongly_connected(const PolicyChain& chain) {
    const std::size_t n = chain.size();
    constexpr auto unset = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> index(n, unset), low(n, 0), comp(n, unset);
    std::vector<std::uint32_t> stack;
    std::vector<char> on_stack(n, 0);
    std::vector<std::pair<std::uint32_t, std::size_t>> call;  // (node, next edge)
    std::uint32_t counter = 0, components = 0;
    const auto& off = chain.offset();
    const auto& col = chain.col();
    for (std::uint32_t root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        call.emplace_back(root, off[root]);
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            auto& [v, e] = call.back();
            if (e < off[v + 1]) {
                const auto w = col[e++];
                if (index[w] == unset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.emplace_back(w, off[w]);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const auto done = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
            if (low[done] == index[done]) {
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = components;
                } while (w != done);
                ++components;
            }
        }
    }
    return {std::move(comp), components};
}

// Closed classes up to this size are factorized directly. Larger ones
// use Gauss-Seidel sweeps in increasing (AoI, VAoI) order: almost all mass
// moves one step up in age per slot, so a sweep nearly solves the balance
// equations and only the reset flow needs further sweeps.
constexpr Eigen::Index kDirectLimit = 4000;
constexpr int kMaxSweeps = 200'000;

Eigen::VectorXd solve_direct(const PolicyChain& chain, const std::vector<std::size_t>& members,
                             const std::vector<std::int64_t>& local) {
    const auto& off = chain.offset();
    const auto& col = chain.col();
    const auto& prob = chain.prob();
    const auto m = static_cast<Eigen::Index>(members.size());
    // (P^T - I) x = 0 with the first equation replaced by sum(x) = 1.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(col.size() + 2 * members.size());
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto i = members[static_cast<std::size_t>(c)];
        triplets.emplace_back(0, c, 1.0);
        if (c > 0) triplets.emplace_back(c, c, -1.0);
        for (auto k = off[i]; k < off[i + 1]; ++k) {
            const auto r = local[col[k]];
            if (r > 0) triplets.emplace_back(r, c, prob[k]);
        }
    }
    Eigen::SparseMatrix<double> a(m, m);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs[0] = 1.0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSolve, "stationary system factorization failed");
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw Error(ErrorCode::SingularSolve, "stationary system solve failed");
    return x;
}

Eigen::VectorXd solve_sweeps(const PolicyChain& chain, const std::vector<std::size_t>& members,
                             const std::vector<std::int64_t>& local) {
    const auto& off = chain.offset();
    const auto& col = chain.col();
    const auto& prob = chain.prob();
    const auto& nodes = chain.nodes();
    const auto m = members.size();

    std::vector<std::uint32_t> order(m);
    for (std::uint32_t c = 0; c < m; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) {
        const auto& u = nodes[members[x]];
        const auto& v = nodes[members[y]];
        return std::tie(u.aoi, u.vaoi, u.battery) < std::tie(v.aoi, v.vaoi, v.battery);
    });

    // Incoming edges per member, self-loops split out.
    std::vector<std::size_t> in_off(m + 1, 0);
    std::vector<double> self(m, 0.0);
    for (std::size_t c = 0; c < m; ++c)
        for (auto k = off[members[c]]; k < off[members[c] + 1]; ++k) {
            const auto j = static_cast<std::size_t>(local[col[k]]);
            if (j != c) ++in_off[j + 1];
        }
    for (std::size_t j = 0; j < m; ++j) in_off[j + 1] += in_off[j];
    std::vector<std::uint32_t> in_src(in_off[m]);
    std::vector<double> in_prob(in_off[m]);
    auto fill = in_off;
    for (std::size_t c = 0; c < m; ++c)
        for (auto k = off[members[c]]; k < off[members[c] + 1]; ++k) {
            const auto j = static_cast<std::size_t>(local[col[k]]);
            if (j == c) {
                self[c] += prob[k];
            } else {
                in_src[fill[j]] = static_cast<std::uint32_t>(c);
                in_prob[fill[j]++] = prob[k];
            }
        }

    Eigen::VectorXd x = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), 1.0 / static_cast<double>(m));
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double change = 0;
        for (auto j : order) {
            double inflow = 0;
            for (auto k = in_off[j]; k < in_off[j + 1]; ++k) inflow += x[in_src[k]] * in_prob[k];
            const double next = inflow / (1.0 - self[j]);
            change = std::max(change, std::abs(next - x[j]));
            x[j] = next;
        }
        const double total = x.sum();
        x /= total;
        if (change <= 1e-13 * x.maxCoeff()) return x;
        if (!std::isfinite(total)) break;
    }
    throw Error(ErrorCode::SingularSolve, "stationary sweeps did not converge");
}

std::vector<double> stationary(const PolicyChain& chain) {
    const auto [comp, count] = strongly_connected(chain);
    const auto& off = chain.offset();
    const auto& col = chain.col();
    const auto& prob = chain.prob();
    std::vector<char> closed(count, 1);
    for (std::size_t i = 0; i < chain.size(); ++i)
        for (auto k = off[i]; k < off[i + 1]; ++k)
            if (comp[col[k]] != comp[i]) closed[comp[i]] = 0;
    std::uint32_t recurrent = 0, n_closed = 0;
    for (std::uint32_t c = 0; c < count; ++c)
        if (closed[c]) {
            recurrent = c;
            ++n_closed;
        }
    if (n_closed != 1)
        throw Error(ErrorCode::MultichainPolicy,
                    std::to_string(n_closed) + " closed classes reachable from the start state");

    std::vector<std::int64_t> local(chain.size(), -1);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < chain.size(); ++i)
        if (comp[i] == recurrent) {
            local[i] = static_cast<std::int64_t>(members.size());
            members.push_back(i);
        }
    const auto m = static_cast<Eigen::Index>(members.size());
    std::vector<double> pi(chain.size(), 0.0);
    if (m == 1) {
        pi[members[0]] = 1.0;
        return pi;
    }
    const Eigen::VectorXd x = m <= kDirectLimit ? solve_direct(chain, members, local) : solve_sweeps(chain, members, local);
    if (!x.allFinite()) throw Error(ErrorCode::SingularSolve, "stationary solve produced non-finite values");

    for (Eigen::Index c = 0; c < m; ++c) pi[members[static_cast<std::size_t>(c)]] = std::max(0.0, x[c]);
    double total = 0;
    for (double v : pi) total += v;
    for (double& v : pi) v /= total;

    std::vector<double> flow(chain.size(), 0.0);
    for (auto i : members)
        for (auto k = off[i]; k < off[i + 1]; ++k) flow[col[k]] += pi[i] * prob[k];
    double residual = 0;
    for (auto i : members) residual = std::max(residual, std::abs(flow[i] - pi[i]));
    if (residual > 1e-9) throw Error(ErrorCode::SingularSolve, "stationary residual too large");
    return pi;
}

PolicyEvaluation run(const SystemParams& params, const PolicyTable& policy, bool track_aoi, bool track_vaoi,
                     std::size_t max_states) {
    if (policy.params_stamp() != params.stamp())
        throw Error(ErrorCode::MismatchedStamp, "policy was built for different parameters");
    if (policy.depends_on_metric()) {
        if (version_governed(policy.kind())) track_vaoi = true;
        else track_aoi = true;
    }
    PolicyChain chain(params, policy, track_aoi, track_vaoi, max_states);
    const auto pi = stationary(chain);
    PolicyEvaluation out;
    out.chain_states = chain.size();
    double aoi = 0, vaoi = 0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (pi[i] == 0) continue;
        ++out.recurrent_states;
        aoi += pi[i] * chain.nodes()[i].aoi;
        vaoi += pi[i] * chain.nodes()[i].vaoi;
        out.transmit_rate += pi[i] * chain.transmit_prob(i);
    }
    out.delivery_rate = out.transmit_rate * params.success_prob();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double p_q = params.query_prob();
    out.average = {track_aoi ? aoi : nan, track_vaoi ? vaoi : nan, track_aoi ? p_q * aoi : nan,
                   track_vaoi ? p_q * vaoi : nan};
    return out;
}

} // namespace

PolicyEvaluation evaluate_policy(const SystemParams& params, const PolicyTable& policy, const EvaluateOptions& opts) {
    const bool aoi = opts.track_all;
    const bool vaoi = opts.track_all;
    return run(params, policy, aoi, vaoi, opts.max_states);
}

double evaluate_policy_exact(const SystemParams& params, MetricKind kind, const PolicyTable& policy) {
    const bool vaoi = version_governed(kind);
    return run(params, policy, !vaoi, vaoi, EvaluateOptions{}.max_states)[kind];
}

std::size_t evaluation_chain_size(const SystemParams& params, MetricKind kind, const PolicyTable& policy) {
    bool aoi = !version_governed(kind), vaoi = version_governed(kind);
    if (policy.depends_on_metric()) (version_governed(policy.kind()) ? vaoi : aoi) = true;
    return PolicyChain(params, policy, aoi, vaoi, std::numeric_limits<std::size_t>::max()).size();
}

BruteForceResult enumerate_optimal_bruteforce(const SystemParams& params, MetricKind kind, std::size_t max_states) {
    const StateIndex space(params);
    if (space.size() > max_states)
        throw Error(ErrorCode::TooLarge, "state space of " + std::to_string(space.size()) + " exceeds " +
                                             std::to_string(max_states));
    std::vector<std::size_t> choice;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (space.state(i).battery >= 1) choice.push_back(i);
    if (choice.size() > 24)
        throw Error(ErrorCode::TooLarge, std::to_string(choice.size()) + " choice states means more than 2^24 policies");

    std::vector<Action> actions(space.size(), Action::Idle);
    BruteForceResult best{idle_policy(params, kind), std::numeric_limits<double>::infinity(), 0, 0};
    const std::uint64_t total = 1ULL << choice.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t k = 0; k < choice.size(); ++k)
            actions[choice[k]] = (mask >> k) & 1ULL ? Action::Transmit : Action::Idle;
        PolicyTable candidate(params, kind, "bruteforce", actions);
        try {
            const double cost = evaluate_policy_exact(params, kind, candidate);
            ++best.evaluated;
            if (cost < best.cost) {
                best.cost = cost;
                best.policy = std::move(candidate);
            }
        } catch (const Error& e) {
            if (e.code() != ErrorCode::MultichainPolicy) throw;
            ++best.skipped_multichain;
        }
    }
    return best;
}

} // namespace semsched
