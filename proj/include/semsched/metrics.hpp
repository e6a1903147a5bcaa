#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "semsched/core.hpp"

namespace semsched {

/// What happened in one slot, as seen by the receiver.
struct SlotEvents {
    bool delivered = false;   // update sent in the previous slot arrived this slot
    bool new_version = false; // source content changed this slot
    bool query = false;       // receiver asked for the information this slot
};

/// Age after one slot: 1 on delivery, otherwise one older (saturating).
constexpr int step_aoi(int aoi, bool delivered, int delta_max) {
    if (delivered) return 1;
    return aoi < delta_max ? aoi + 1 : delta_max;
}

/// Version lag after one slot. A delivered sample holds the content of its
/// transmission slot, so a version generated while it was in flight leaves
/// the receiver one version behind.
constexpr int step_vaoi(int vaoi, bool delivered, bool new_version, int delta_max) {
    const int gen = new_version ? 1 : 0;
    if (delivered) return gen;
    return vaoi + gen < delta_max ? vaoi + gen : delta_max;
}

constexpr long long stage_cost(MetricKind kind, int metric, bool query) {
    if (query_gated(kind)) return query ? metric : 0;
    return metric;
}

struct MetricSample {
    int aoi = 0;
    int vaoi = 0;
    int qaoi = 0;
    int qvaoi = 0;

    int get(MetricKind kind) const {
        switch (kind) {
        case MetricKind::AoI: return aoi;
        case MetricKind::VAoI: return vaoi;
        case MetricKind::QAoI: return qaoi;
        case MetricKind::QVAoI: return qvaoi;
        }
        return 0;
    }
    friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

struct TraceStart {
    std::optional<int> aoi;  // defaults to delta_max: nothing delivered yet
    int vaoi = 0;
};

/// Value of each metric at every slot, after that slot's events are applied.
std::vector<MetricSample> evolve_trace(std::span<const SlotEvents> events, int delta_max,
                                       TraceStart start = {});

/// Whitespace-separated rows `delivered new_version query` (0/1), `#` comments.
std::vector<SlotEvents> read_events(std::istream& in);
void write_trace(std::ostream& out, std::span<const SlotEvents> events,
                 std::span<const MetricSample> series);

} // namespace semsched
