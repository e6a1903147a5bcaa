#include "semsched/core.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "semsched/textio.hpp"

namespace semsched {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NonPositiveCapacity: return "NonPositiveCapacity";
    case ErrorCode::TruncationTooTight: return "TruncationTooTight";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::InfeasibleAction: return "InfeasibleAction";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::MultichainPolicy: return "MultichainPolicy";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NotThresholdStructured: return "NotThresholdStructured";
    case ErrorCode::StateOutOfRange: return "StateOutOfRange";
    case ErrorCode::MismatchedStamp: return "MismatchedStamp";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::MonotonicityViolation: return "MonotonicityViolation";
    case ErrorCode::Format: return "Format";
    }
    return "Unknown";
}

std::string_view to_string(MetricKind kind) {
    switch (kind) {
    case MetricKind::AoI: return "AoI";
    case MetricKind::VAoI: return "VAoI";
    case MetricKind::QAoI: return "QAoI";
    case MetricKind::QVAoI: return "QVAoI";
    }
    return "?";
}

MetricKind parse_kind(std::string_view text) {
    for (auto k : kAllKinds)
        if (to_string(k) == text) return k;
    throw Error(ErrorCode::Format, "unknown metric kind '" + std::string(text) + "'");
}

namespace {

std::string join_violations(const std::vector<Violation>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += "; ";
        out += std::string(to_string(v[i].code)) + ": " + v[i].message;
    }
    return out;
}

bool in_unit(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

constexpr long long kMaxDimension = 10'000'000;

} // namespace

ParamError::ParamError(std::vector<Violation> violations)
    : Error(violations.empty() ? ErrorCode::OutOfRange : violations.front().code,
            join_violations(violations)),
      violations_(std::move(violations)) {}

int truncation_guard(double p_s) { return 10 * static_cast<int>(std::ceil(1.0 / p_s)); }

SystemParams validate_params(const RawParams& raw) {
    std::vector<Violation> bad;
    auto prob = [&](const char* name, double p) {
        if (!in_unit(p))
            bad.push_back({ErrorCode::OutOfRange,
                           std::string(name) + " = " + textio::format_double(p) + " outside [0, 1]"});
    };
    if (!in_unit(raw.p_s) || raw.p_s == 0.0)
        bad.push_back({ErrorCode::OutOfRange,
                       "p_s = " + textio::format_double(raw.p_s) + " outside (0, 1]"});
    prob("p_v", raw.p_v);
    prob("p_q", raw.p_q);
    prob("p_e", raw.p_e);
    if (raw.B < 1)
        bad.push_back({ErrorCode::NonPositiveCapacity, "B = " + std::to_string(raw.B) + " < 1"});
    else if (raw.B > kMaxDimension)
        bad.push_back({ErrorCode::OutOfRange, "B = " + std::to_string(raw.B) + " too large"});
    if (raw.N < 0 || raw.N > kMaxDimension)
        bad.push_back({ErrorCode::OutOfRange, "N = " + std::to_string(raw.N) + " outside [0, 1e7]"});
    if (raw.delta_max < 1 || raw.delta_max > kMaxDimension) {
        bad.push_back({ErrorCode::OutOfRange,
                       "delta_max = " + std::to_string(raw.delta_max) + " outside [1, 1e7]"});
    } else if (in_unit(raw.p_s) && raw.p_s > 0.0 && !raw.allow_tight_truncation) {
        const int guard = truncation_guard(raw.p_s);
        if (raw.delta_max < guard)
            bad.push_back({ErrorCode::TruncationTooTight,
                           "delta_max = " + std::to_string(raw.delta_max) + " below guard " +
                               std::to_string(guard) + " (set allow_tight_truncation to override)"});
    }
    if (!bad.empty()) throw ParamError(std::move(bad));

    SystemParams p;
    p.p_s_ = raw.p_s;
    p.p_v_ = raw.p_v;
    p.p_q_ = raw.p_q;
    p.p_e_ = raw.p_e;
    p.B_ = static_cast<int>(raw.B);
    p.N_ = static_cast<int>(raw.N);
    p.delta_max_ = static_cast<int>(raw.delta_max);
    p.allow_tight_ = raw.allow_tight_truncation;
    return p;
}

RawParams SystemParams::raw() const {
    RawParams r;
    r.p_s = p_s_;
    r.p_v = p_v_;
    r.p_q = p_q_;
    r.p_e = p_e_;
    r.B = B_;
    r.N = N_;
    r.delta_max = delta_max_;
    r.allow_tight_truncation = allow_tight_;
    return r;
}

SystemParams SystemParams::with_energy_prob(double p_e) const {
    auto r = raw();
    r.p_e = p_e;
    return validate_params(r);
}

SystemParams SystemParams::with_query_prob(double p_q) const {
    auto r = raw();
    r.p_q = p_q;
    return validate_params(r);
}

SystemParams SystemParams::with_success_prob(double p_s) const {
    auto r = raw();
    r.p_s = p_s;
    return validate_params(r);
}

std::string SystemParams::canonical() const {
    using textio::format_double;
    return "p_s=" + format_double(p_s_) + " p_v=" + format_double(p_v_) +
           " p_q=" + format_double(p_q_) + " p_e=" + format_double(p_e_) +
           " B=" + std::to_string(B_) + " N=" + std::to_string(N_) +
           " delta_max=" + std::to_string(delta_max_);
}

std::uint64_t SystemParams::stamp() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

bool parse_bool(std::string_view v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw Error(ErrorCode::Format, "not a boolean: '" + std::string(v) + "'");
}

} // namespace

RawParams parse_config(std::istream& in, RawParams base) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = textio::trim(view);
        if (view.empty()) continue;
        auto fail = [&](const std::string& why) {
            throw Error(ErrorCode::ConfigParse, "line " + std::to_string(lineno) + ": " + why);
        };
        auto eq = view.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value', got '" + std::string(view) + "'");
        auto key = textio::trim(view.substr(0, eq));
        auto value = textio::trim(view.substr(eq + 1));
        if (key.empty() || value.empty()) fail("empty key or value");
        try {
            if (key == "p_s") base.p_s = textio::parse_double(value);
            else if (key == "p_v") base.p_v = textio::parse_double(value);
            else if (key == "p_q") base.p_q = textio::parse_double(value);
            else if (key == "p_e") base.p_e = textio::parse_double(value);
            else if (key == "B") base.B = textio::parse_int(value);
            else if (key == "N") base.N = textio::parse_int(value);
            else if (key == "delta_max") base.delta_max = textio::parse_int(value);
            else if (key == "allow_tight_truncation") base.allow_tight_truncation = parse_bool(value);
            else fail("unknown key '" + std::string(key) + "'");
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigParse) throw;
            fail(e.what());
        }
    }
    return base;
}

RawParams load_config(const std::filesystem::path& path, RawParams base) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigParse, "cannot read config " + path.string());
    return parse_config(in, base);
}

std::string render_config(const SystemParams& params) {
    using textio::format_double;
    std::ostringstream os;
    os << "p_s = " << format_double(params.success_prob()) << '\n'
       << "p_v = " << format_double(params.version_prob()) << '\n'
       << "p_q = " << format_double(params.query_prob()) << '\n'
       << "p_e = " << format_double(params.energy_prob()) << '\n'
       << "B = " << params.battery_capacity() << '\n'
       << "N = " << params.relays() << '\n'
       << "delta_max = " << params.delta_max() << '\n';
    if (params.allow_tight_truncation()) os << "allow_tight_truncation = true\n";
    return os.str();
}

void write_header(std::ostream& out, const Header& header) {
    for (const auto& [k, v] : header) out << "# " << k << " = " << v << '\n';
}

Header read_header(std::istream& in) {
    Header header;
    while (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        std::string_view view = textio::trim(std::string_view(line).substr(1));
        auto eq = view.find(" = ");
        if (eq == std::string_view::npos) continue;
        header.emplace_back(std::string(textio::trim(view.substr(0, eq))),
                            std::string(textio::trim(view.substr(eq + 3))));
    }
    return header;
}

const std::string* header_value(const Header& header, std::string_view key) {
    for (const auto& [k, v] : header)
        if (k == key) return &v;
    return nullptr;
}

const std::string& header_require(const Header& header, std::string_view key) {
    if (auto* v = header_value(header, key)) return *v;
    throw Error(ErrorCode::Format, "missing header key '" + std::string(key) + "'");
}

Header params_header(const SystemParams& params) {
    using textio::format_double;
    return {{"p_s", format_double(params.success_prob())},
            {"p_v", format_double(params.version_prob())},
            {"p_q", format_double(params.query_prob())},
            {"p_e", format_double(params.energy_prob())},
            {"B", std::to_string(params.battery_capacity())},
            {"N", std::to_string(params.relays())},
            {"delta_max", std::to_string(params.delta_max())},
            {"allow_tight_truncation", params.allow_tight_truncation() ? "true" : "false"}};
}

SystemParams params_from_header(const Header& header) {
    RawParams raw;
    raw.p_s = textio::parse_double(header_require(header, "p_s"));
    raw.p_v = textio::parse_double(header_require(header, "p_v"));
    raw.p_q = textio::parse_double(header_require(header, "p_q"));
    raw.p_e = textio::parse_double(header_require(header, "p_e"));
    raw.B = textio::parse_int(header_require(header, "B"));
    raw.N = textio::parse_int(header_require(header, "N"));
    raw.delta_max = textio::parse_int(header_require(header, "delta_max"));
    if (auto* v = header_value(header, "allow_tight_truncation")) raw.allow_tight_truncation = parse_bool(*v);
    return validate_params(raw);
}

} // namespace semsched
