#pragma once

#include <cassert>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semsched/error.hpp"

namespace semsched {

enum class MetricKind { AoI, VAoI, QAoI, QVAoI };
enum class Action : int { Idle = 0, Transmit = 1 };

inline constexpr MetricKind kAllKinds[] = {MetricKind::AoI, MetricKind::VAoI, MetricKind::QAoI,
                                           MetricKind::QVAoI};

std::string_view to_string(MetricKind kind);
MetricKind parse_kind(std::string_view text);

/// True when the kind's state dynamics follow the version lag (VAoI, QVAoI).
constexpr bool version_governed(MetricKind kind) {
    return kind == MetricKind::VAoI || kind == MetricKind::QVAoI;
}

/// True when the stage cost is only charged on query slots.
constexpr bool query_gated(MetricKind kind) {
    return kind == MetricKind::QAoI || kind == MetricKind::QVAoI;
}

/// Unvalidated parameter candidate, e.g. straight out of a config file.
struct RawParams {
    double p_s = 0.8;
    double p_v = 0.25;
    double p_q = 0.2;
    double p_e = 0.05;
    long long B = 10;
    long long N = 4;
    long long delta_max = 100;
    bool allow_tight_truncation = false;
};

/// Validated system parameters. Only validate_params() produces these, so
/// any instance in circulation satisfies the documented ranges.
class SystemParams {
public:
    double success_prob() const { return p_s_; }
    double version_prob() const { return p_v_; }
    double query_prob() const { return p_q_; }
    double energy_prob() const { return p_e_; }
    int battery_capacity() const { return B_; }
    int relays() const { return N_; }
    int delta_max() const { return delta_max_; }
    bool allow_tight_truncation() const { return allow_tight_; }

    RawParams raw() const;

    /// Copy with one rate replaced; revalidates.
    SystemParams with_energy_prob(double p_e) const;
    SystemParams with_query_prob(double p_q) const;
    SystemParams with_success_prob(double p_s) const;

    /// Stable textual rendering of the model parameters (no flags). Used
    /// for file headers and as the input of stamp().
    std::string canonical() const;
    /// 64-bit FNV-1a digest of canonical(); policies carry it.
    std::uint64_t stamp() const;

    friend bool operator==(const SystemParams&, const SystemParams&) = default;

private:
    friend SystemParams validate_params(const RawParams& raw);
    SystemParams() = default;

    double p_s_ = 0, p_v_ = 0, p_q_ = 0, p_e_ = 0;
    int B_ = 1, N_ = 0, delta_max_ = 1;
    bool allow_tight_ = false;
};

/// Smallest truncation bound accepted without the override flag.
int truncation_guard(double p_s);

struct Violation {
    ErrorCode code;
    std::string message;
};

/// Raised by validate_params; carries every violated constraint. code()
/// reports the first one.
class ParamError : public Error {
public:
    explicit ParamError(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

SystemParams validate_params(const RawParams& raw);

/// Flat `key = value` config with `#` comments. Unknown keys and malformed
/// lines raise ConfigParse with the offending line number.
RawParams parse_config(std::istream& in, RawParams base = {});
RawParams load_config(const std::filesystem::path& path, RawParams base = {});
std::string render_config(const SystemParams& params);

/// `# key = value` header block used by every artifact file format.
using Header = std::vector<std::pair<std::string, std::string>>;
void write_header(std::ostream& out, const Header& header);
/// Consumes leading `#` lines; stops before the first non-comment line.
Header read_header(std::istream& in);
const std::string* header_value(const Header& header, std::string_view key);
const std::string& header_require(const Header& header, std::string_view key);
Header params_header(const SystemParams& params);
SystemParams params_from_header(const Header& header);

struct AgentState {
    int metric = 0;
    int battery = 0;
    int query = 0;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

inline AgentState make_state(int metric, int battery, int query, const SystemParams& p) {
    assert(metric >= 0 && metric <= p.delta_max());
    assert(battery >= 0 && battery <= p.battery_capacity());
    assert(query == 0 || query == 1);
    (void)p;
    return {metric, battery, query};
}

} // namespace semsched
