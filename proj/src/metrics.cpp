#include "semsched/metrics.hpp"

#include <istream>
#include <ostream>
#include <string>

#include "semsched/textio.hpp"

namespace semsched {

std::vector<MetricSample> evolve_trace(std::span<const SlotEvents> events, int delta_max,
                                       TraceStart start) {
    if (events.empty()) throw Error(ErrorCode::EmptyTrace, "event trace has no slots");
    int aoi = start.aoi.value_or(delta_max);
    int vaoi = start.vaoi;
    std::vector<MetricSample> out;
    out.reserve(events.size());
    for (const auto& ev : events) {
        aoi = step_aoi(aoi, ev.delivered, delta_max);
        vaoi = step_vaoi(vaoi, ev.delivered, ev.new_version, delta_max);
        out.push_back({aoi, vaoi, static_cast<int>(stage_cost(MetricKind::QAoI, aoi, ev.query)),
                       static_cast<int>(stage_cost(MetricKind::QVAoI, vaoi, ev.query))});
    }
    return out;
}

std::vector<SlotEvents> read_events(std::istream& in) {
    std::vector<SlotEvents> events;
    std::string line;
    int lineno = 0;
    auto flag = [&](std::string_view tok) {
        if (tok == "0") return false;
        if (tok == "1") return true;
        throw Error(ErrorCode::Format,
                    "line " + std::to_string(lineno) + ": expected 0 or 1, got '" + std::string(tok) + "'");
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        auto toks = textio::split_ws(view);
        if (toks.empty()) continue;
        if (toks.size() != 3)
            throw Error(ErrorCode::Format,
                        "line " + std::to_string(lineno) + ": expected 3 columns (delivered new_version query)");
        events.push_back({flag(toks[0]), flag(toks[1]), flag(toks[2])});
    }
    return events;
}

void write_trace(std::ostream& out, std::span<const SlotEvents> events,
                 std::span<const MetricSample> series) {
    out << "slot delivered new_version query aoi vaoi qaoi qvaoi\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        const auto& e = events[t];
        const auto& m = series[t];
        out << t << ' ' << e.delivered << ' ' << e.new_version << ' ' << e.query << ' ' << m.aoi << ' '
            << m.vaoi << ' ' << m.qaoi << ' ' << m.qvaoi << '\n';
    }
}

} // namespace semsched
