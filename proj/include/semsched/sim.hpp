#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "semsched/core.hpp"
#include "semsched/policy.hpp"

namespace semsched {

/// SplitMix64 stream. Each random process of a run owns one, seeded from
/// the run seed and a fixed stream id, so draws never depend on how other
/// processes consumed theirs.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t state_;
};

/// Stream ids, recorded in run manifests.
enum class Stream : std::uint64_t { Energy = 1, Channel = 2, Version = 3, Query = 4, Overlay = 5 };

struct SimConfig {
    long long horizon = 1'000'000;
    std::uint64_t seed = 1;
    long long warmup = 10'000;
    /// Keep the per-slot CS trace (post-warmup) for monitor_metrics.
    bool record_trace = false;
};

/// One post-warmup slot as observed at the CS.
struct TraceSlot {
    int aoi;
    int vaoi;
    bool query;
};

struct SimSummary {
    /// Post-warmup time averages, indexed by MetricKind. Query-gated kinds
    /// count zero on non-query slots.
    std::array<double, 4> avg{};
    /// AoI and VAoI averaged over query slots only (NaN without queries).
    double aoi_per_query = 0;
    double vaoi_per_query = 0;
    long long measured_slots = 0;
    long long query_slots = 0;

    // Counters cover the whole run, warmup included.
    long long transmissions = 0;
    long long successes = 0;
    long long energy_harvested = 0;  // units actually stored
    long long energy_wasted = 0;     // arrivals lost to a full battery
    long long empty_battery_slots = 0;
    int initial_battery = 0;
    int final_battery = 0;
    int min_battery = 0;
    int max_battery = 0;

    std::vector<TraceSlot> trace;

    double operator[](MetricKind k) const { return avg[static_cast<std::size_t>(k)]; }
};

void validate_sim_config(const SimConfig& cfg);

/// Runs one slotted simulation. Throws MismatchedStamp when the policy was
/// built for other parameters.
SimSummary simulate(const SystemParams& params, const AnyPolicy& policy, const SimConfig& cfg);

struct MonitorAverages {
    /// CS plus N, exact for every run (the relay chain only delays).
    double aoi = 0;
    double qaoi = 0;           // gated over all slots: CS + N * (query fraction)
    double aoi_per_query = 0;  // CS per-query + N
    /// Closed form: CS plus N * p_v (respectively p_q-gated).
    double vaoi_analytic = 0;
    double qvaoi_analytic = 0;
    double vaoi_per_query_analytic = 0;
    /// Overlay: each slot adds an independent Binomial(N, p_v) draw to the
    /// CS version lag.
    double vaoi_overlay = 0;
    double qvaoi_overlay = 0;
    double vaoi_per_query_overlay = 0;
};

MonitorAverages monitor_metrics(const SimSummary& summary, const std::vector<TraceSlot>& trace,
                                const SystemParams& params, std::uint64_t seed);

struct Estimate {
    double mean = 0;
    double half_width = 0;  // 95% normal approximation
};

Estimate estimate(const std::vector<double>& samples);

struct ReplicateResult {
    std::array<Estimate, 4> cs{};
    std::array<Estimate, 4> monitor{};  // AoI, VAoI (overlay), QAoI, QVAoI (overlay)
    Estimate monitor_vaoi_offset;       // overlay minus CS, per replication
    Estimate transmit_rate;
    std::vector<SimSummary> runs;
    std::vector<MonitorAverages> monitors;

    const Estimate& operator[](MetricKind k) const { return cs[static_cast<std::size_t>(k)]; }
};

/// Replication r runs with seed cfg.seed + r * seed_stride (stride 0 repeats
/// one seed). Runs execute on up to `jobs` threads; results are reduced in
/// replication order.
ReplicateResult replicate(const SystemParams& params, const AnyPolicy& policy, const SimConfig& cfg, int n_reps,
                          int jobs = 1, std::uint64_t seed_stride = 1);

/// CSV: params columns, policy id, horizon, seed, CS averages, monitor
/// averages, counters.
std::string sim_csv_header();
std::string sim_csv_row(const SystemParams& params, const std::string& policy_id, const SimConfig& cfg,
                        const SimSummary& s, const MonitorAverages& m);

} // namespace semsched
