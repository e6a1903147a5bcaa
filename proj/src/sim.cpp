#include "semsched/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "semsched/metrics.hpp"
#include "semsched/parallel.hpp"
#include "semsched/textio.hpp"

namespace semsched {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream_id)
    : state_(mix64(mix64(seed) ^ (stream_id * 0xd1b54a32d192ed03ULL))) {}

void validate_sim_config(const SimConfig& cfg) {
    if (cfg.horizon < 1) throw Error(ErrorCode::OutOfRange, "horizon must be >= 1");
    if (cfg.warmup < 0 || cfg.warmup >= cfg.horizon)
        throw Error(ErrorCode::OutOfRange, "warmup must lie in [0, horizon)");
}

SimSummary simulate(const SystemParams& params, const AnyPolicy& policy, const SimConfig& cfg) {
    validate_sim_config(cfg);
    if (policy_params(policy).stamp() != params.stamp())
        throw Error(ErrorCode::MismatchedStamp, "policy stamped for [" + policy_params(policy).canonical() +
                                                    "], simulation uses [" + params.canonical() + "]");
    const auto table = std::visit(
        [](const auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, PolicyTable>) return p;
            else return p.to_table("thresholds");
        },
        policy);
    const StateIndex space(params);
    const bool by_version = version_governed(table.kind());

    RandomStream energy_rng(cfg.seed, static_cast<std::uint64_t>(Stream::Energy));
    RandomStream channel_rng(cfg.seed, static_cast<std::uint64_t>(Stream::Channel));
    RandomStream version_rng(cfg.seed, static_cast<std::uint64_t>(Stream::Version));
    RandomStream query_rng(cfg.seed, static_cast<std::uint64_t>(Stream::Query));

    const int dmax = params.delta_max();
    const int cap = params.battery_capacity();
    const double p_s = params.success_prob(), p_e = params.energy_prob(), p_v = params.version_prob(),
                 p_q = params.query_prob();

    SimSummary out;
    int aoi = dmax;
    int vaoi = 0;
    int battery = cap;
    bool query = query_rng.bernoulli(p_q);
    out.initial_battery = out.min_battery = out.max_battery = battery;
    if (cfg.record_trace) out.trace.reserve(static_cast<std::size_t>(cfg.horizon - cfg.warmup));

    long double sum_aoi = 0, sum_vaoi = 0, sum_qaoi = 0, sum_qvaoi = 0;
    for (long long t = 0; t < cfg.horizon; ++t) {
        if (t >= cfg.warmup) {
            sum_aoi += aoi;
            sum_vaoi += vaoi;
            if (query) {
                sum_qaoi += aoi;
                sum_qvaoi += vaoi;
                ++out.query_slots;
            }
            if (cfg.record_trace) out.trace.push_back({aoi, vaoi, query});
        }
        Action action = Action::Idle;
        if (battery == 0) ++out.empty_battery_slots;
        else action = table.at(space.index({by_version ? vaoi : aoi, battery, query ? 1 : 0}));

        bool delivered = false;
        if (action == Action::Transmit) {
            --battery;
            ++out.transmissions;
            delivered = channel_rng.bernoulli(p_s);
            if (delivered) ++out.successes;
        }
        if (energy_rng.bernoulli(p_e)) {
            if (battery < cap) {
                ++battery;
                ++out.energy_harvested;
            } else {
                ++out.energy_wasted;
            }
        }
        const bool version = version_rng.bernoulli(p_v);
        aoi = step_aoi(aoi, delivered, dmax);
        vaoi = step_vaoi(vaoi, delivered, version, dmax);
        query = query_rng.bernoulli(p_q);
        out.min_battery = std::min(out.min_battery, battery);
        out.max_battery = std::max(out.max_battery, battery);
    }
    out.final_battery = battery;
    out.measured_slots = cfg.horizon - cfg.warmup;
    const auto n = static_cast<long double>(out.measured_slots);
    out.avg = {static_cast<double>(sum_aoi / n), static_cast<double>(sum_vaoi / n),
               static_cast<double>(sum_qaoi / n), static_cast<double>(sum_qvaoi / n)};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.aoi_per_query = out.query_slots ? static_cast<double>(sum_qaoi / out.query_slots) : nan;
    out.vaoi_per_query = out.query_slots ? static_cast<double>(sum_qvaoi / out.query_slots) : nan;
    return out;
}

MonitorAverages monitor_metrics(const SimSummary& summary, const std::vector<TraceSlot>& trace,
                                const SystemParams& params, std::uint64_t seed) {
    const int relays = params.relays();
    const double p_v = params.version_prob();
    const double query_fraction =
        summary.measured_slots ? static_cast<double>(summary.query_slots) / static_cast<double>(summary.measured_slots)
                               : 0.0;
    MonitorAverages m;
    m.aoi = summary[MetricKind::AoI] + relays;
    m.qaoi = summary[MetricKind::QAoI] + relays * query_fraction;
    m.aoi_per_query = summary.aoi_per_query + relays;
    m.vaoi_analytic = summary[MetricKind::VAoI] + relays * p_v;
    m.qvaoi_analytic = summary[MetricKind::QVAoI] + params.query_prob() * relays * p_v;
    m.vaoi_per_query_analytic = summary.vaoi_per_query + relays * p_v;

    RandomStream overlay(seed, static_cast<std::uint64_t>(Stream::Overlay));
    long double sum_v = 0, sum_qv = 0;
    long long queries = 0;
    for (const auto& slot : trace) {
        int lag = 0;
        for (int k = 0; k < relays; ++k) lag += overlay.bernoulli(p_v) ? 1 : 0;
        const int v = slot.vaoi + lag;
        sum_v += v;
        if (slot.query) {
            sum_qv += v;
            ++queries;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (trace.empty()) {
        m.vaoi_overlay = m.qvaoi_overlay = m.vaoi_per_query_overlay = nan;
    } else {
        const auto n = static_cast<long double>(trace.size());
        m.vaoi_overlay = static_cast<double>(sum_v / n);
        m.qvaoi_overlay = static_cast<double>(sum_qv / n);
        m.vaoi_per_query_overlay = queries ? static_cast<double>(sum_qv / queries) : nan;
    }
    return m;
}

Estimate estimate(const std::vector<double>& samples) {
    Estimate e;
    if (samples.empty()) return e;
    long double sum = 0;
    for (double x : samples) sum += x;
    e.mean = static_cast<double>(sum / samples.size());
    if (samples.size() < 2) return e;
    long double ss = 0;
    for (double x : samples) ss += (x - e.mean) * (x - e.mean);
    const double sd = std::sqrt(static_cast<double>(ss / (samples.size() - 1)));
    e.half_width = 1.959963984540054 * sd / std::sqrt(static_cast<double>(samples.size()));
    return e;
}

ReplicateResult replicate(const SystemParams& params, const AnyPolicy& policy, const SimConfig& cfg, int n_reps,
                          int jobs, std::uint64_t seed_stride) {
    if (n_reps < 2) throw Error(ErrorCode::OutOfRange, "replicate needs at least 2 replications");
    ReplicateResult out;
    out.runs.resize(static_cast<std::size_t>(n_reps));
    out.monitors.resize(static_cast<std::size_t>(n_reps));
    parallel_for(static_cast<std::size_t>(n_reps), jobs, [&](std::size_t r) {
        SimConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + r * seed_stride;
        run_cfg.record_trace = true;
        auto summary = simulate(params, policy, run_cfg);
        out.monitors[r] = monitor_metrics(summary, summary.trace, params, run_cfg.seed);
        summary.trace.clear();
        summary.trace.shrink_to_fit();
        out.runs[r] = std::move(summary);
    });
    auto column = [&](auto get) {
        std::vector<double> xs;
        for (std::size_t r = 0; r < out.runs.size(); ++r) xs.push_back(get(r));
        return estimate(xs);
    };
    for (auto k : kAllKinds) {
        const auto i = static_cast<std::size_t>(k);
        out.cs[i] = column([&](std::size_t r) { return out.runs[r].avg[i]; });
    }
    out.monitor[0] = column([&](std::size_t r) { return out.monitors[r].aoi; });
    out.monitor[1] = column([&](std::size_t r) { return out.monitors[r].vaoi_overlay; });
    out.monitor[2] = column([&](std::size_t r) { return out.monitors[r].qaoi; });
    out.monitor[3] = column([&](std::size_t r) { return out.monitors[r].qvaoi_overlay; });
    out.monitor_vaoi_offset =
        column([&](std::size_t r) { return out.monitors[r].vaoi_overlay - out.runs[r][MetricKind::VAoI]; });
    out.transmit_rate = column([&](std::size_t r) {
        return static_cast<double>(out.runs[r].transmissions) / static_cast<double>(cfg.horizon);
    });
    return out;
}

std::string sim_csv_header() {
    return "p_s,p_v,p_q,p_e,B,N,delta_max,policy,horizon,warmup,seed,"
           "cs_aoi,cs_vaoi,cs_qaoi,cs_qvaoi,cs_aoi_per_query,cs_vaoi_per_query,"
           "mon_aoi,mon_vaoi,mon_qaoi,mon_qvaoi,mon_vaoi_analytic,mon_qvaoi_analytic,"
           "transmissions,successes,energy_harvested,energy_wasted,empty_battery_slots,final_battery";
}

std::string sim_csv_row(const SystemParams& p, const std::string& policy_id, const SimConfig& cfg, const SimSummary& s,
                        const MonitorAverages& m) {
    using textio::format_double;
    std::ostringstream os;
    os << format_double(p.success_prob()) << ',' << format_double(p.version_prob()) << ','
       << format_double(p.query_prob()) << ',' << format_double(p.energy_prob()) << ',' << p.battery_capacity() << ','
       << p.relays() << ',' << p.delta_max() << ',' << policy_id << ',' << cfg.horizon << ',' << cfg.warmup << ','
       << cfg.seed;
    for (double v : s.avg) os << ',' << format_double(v);
    os << ',' << format_double(s.aoi_per_query) << ',' << format_double(s.vaoi_per_query) << ','
       << format_double(m.aoi) << ',' << format_double(m.vaoi_overlay) << ',' << format_double(m.qaoi) << ','
       << format_double(m.qvaoi_overlay) << ',' << format_double(m.vaoi_analytic) << ','
       << format_double(m.qvaoi_analytic) << ',' << s.transmissions << ',' << s.successes << ','
       << s.energy_harvested << ',' << s.energy_wasted << ',' << s.empty_battery_slots << ',' << s.final_battery;
    return os.str();
}

} // namespace semsched
