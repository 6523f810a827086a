#ifndef OSCGRAPH_IO_HPP
#define OSCGRAPH_IO_HPP

// Run configuration and report emission for the command-line tool.
//
// Configs are flat `key = value` text: `#` starts a comment, complex values
// are written `re,im`, truncation boxes `MxN` (channel counts per side).
// Unknown keys are rejected so typos fail loudly.  Reports are CSV (header
// line, data rows, resolved config as trailing `# key = value` lines) or
// JSON (a `meta` object plus a `rows` array).  Floats are printed with %.17g
// so values round-trip and identical runs are byte-identical.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <iostream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "boundary_system.hpp"
#include "multiplicity.hpp"
#include "params.hpp"

namespace oscgraph {

/// Malformed or invalid configuration (CLI exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unreadable config file or unwritable report (CLI exit 3).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ReportFormat { Csv, Json };

inline const char* format_name(ReportFormat f) {
    return f == ReportFormat::Csv ? "csv" : "json";
}

/// Scan grid start..stop inclusive in steps of `step`; start == stop denotes
/// the empty scan (a header-only report).
struct LambdaGrid {
    double start = 0.0;
    double stop = 0.0;
    double step = 1.0;

    std::vector<double> points() const {
        std::vector<double> out;
        if (stop == start) return out;
        const double slack = step * 1e-9;
        for (long k = 0;; ++k) {
            const double x = start + double(k) * step;
            if (x > stop + slack) break;
            out.push_back(x);
        }
        return out;
    }
};

/// Channel-local right-hand side for `resolve`: one bump in one channel.
struct SourceSpec {
    enum class Kind { Gaussian, Spline };
    Kind kind = Kind::Gaussian;
    int m = 0;
    int n = 0;
    double center = 0.0;
    double width = 0.5;
    cplx amplitude{1.0, 0.0};
};

struct RunConfig {
    ModelParams params{1.0, 1.0, 1.0, 1.0};
    cplx Lambda{0.0, 1.0};
    TruncationBox box{23, 23};  // config syntax 24x24 = channel counts
    double h = 0.05;
    LambdaGrid lambda_grid;
    std::vector<double> tau{10.0, 40.0, 160.0, 640.0};
    SourceSpec source;
    bool circ = false;
    std::string suite = "all";
    std::string force_regime;  // empty = classify from the couplings
    ReportFormat format = ReportFormat::Csv;
    std::string out;  // empty = stdout
    std::map<std::string, double> tol{{"dirichlet", 1e-10}, {"doubling", 1e-6},
                                      {"edge", std::numeric_limits<double>::infinity()},
                                      {"matching", 1e-7},   {"ode", 1e-6},
                                      {"solver", 1e-8}};

    double tolerance(const std::string& name) const {
        const auto it = tol.find(name);
        if (it == tol.end()) throw std::logic_error("unknown tolerance: " + name);
        return it->second;
    }

    void validate() const;
};

inline std::optional<RegimeTag> parse_regime(std::string_view s) {
    if (s == "subsub") return RegimeTag::SubSub;
    if (s == "critsub") return RegimeTag::CritSub;
    if (s == "subcrit") return RegimeTag::SubCrit;
    if (s == "critcrit") return RegimeTag::CritCrit;
    if (s == "supercritical") return RegimeTag::Supercritical;
    return std::nullopt;
}

/// Canonical couplings realizing a requested regime exactly, keeping the
/// frequencies: the escape hatch for scans whose detection at alpha/nu = sqrt 2
/// would otherwise sit on the classification knife edge.  Multiplicities
/// depend on the couplings only through their class, so any representative
/// gives the forced regime's law.
inline ModelParams regime_representative(const ModelParams& p, RegimeTag tag) {
    ModelParams out = p;
    const double cp = std::sqrt(2.0) * p.nu_plus;
    const double cm = std::sqrt(2.0) * p.nu_minus;
    switch (tag) {
        case RegimeTag::SubSub: out.alpha_plus = 0.0; out.alpha_minus = 0.0; break;
        case RegimeTag::CritSub: out.alpha_plus = cp; out.alpha_minus = 0.0; break;
        case RegimeTag::SubCrit: out.alpha_plus = 0.0; out.alpha_minus = cm; break;
        case RegimeTag::CritCrit: out.alpha_plus = cp; out.alpha_minus = cm; break;
        case RegimeTag::Supercritical: out.alpha_plus = 2.0 * p.nu_plus; out.alpha_minus = 0.0; break;
    }
    return out;
}

inline void RunConfig::validate() const {
    try {
        params.validate();
        box.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (!(h > 0.0)) throw ConfigError("h must be positive");
    if (!(lambda_grid.step > 0.0)) throw ConfigError("lambda_step must be positive");
    if (lambda_grid.stop < lambda_grid.start)
        throw ConfigError("lambda_stop must not be below lambda_start");
    if (!std::isfinite(Lambda.real()) || !std::isfinite(Lambda.imag()))
        throw ConfigError("lambda must be finite");
    if (tau.empty()) throw ConfigError("tau list must not be empty");
    for (double t : tau)
        if (!std::isfinite(t) || t == 0.0) throw ConfigError("tau values must be finite and nonzero");
    if (source.m < 0 || source.n < 0) throw ConfigError("source channel must be nonnegative");
    if (!box.contains({source.m, source.n})) throw ConfigError("source channel outside box");
    if (!(source.width > 0.0)) throw ConfigError("source_width must be positive");
    for (const auto& [key, value] : tol)
        if (!(value > 0.0)) throw ConfigError("tol." + key + " must be positive");
    if (suite != "basis" && suite != "traceclass" && suite != "jacobi" && suite != "all")
        throw ConfigError("suite must be basis, traceclass, jacobi, or all");
    if (!force_regime.empty() && !parse_regime(force_regime))
        throw ConfigError("unknown force_regime: " + force_regime);
}

// ---------------------------------------------------------------------------
// value formatting

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_complex(cplx z) {
    return format_double(z.real()) + "," + format_double(z.imag());
}

inline std::string box_text(const TruncationBox& b) {
    return std::to_string(b.m_max + 1) + "x" + std::to_string(b.n_max + 1);
}

using Cell = std::variant<std::string, double, std::int64_t>;

inline std::string cell_text(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    return std::to_string(std::get<std::int64_t>(c));
}

inline std::string json_quote(const std::string& s) {
    std::string out = "\"";
    for (const char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    out += '"';
    return out;
}

inline std::string cell_json(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return json_quote(*s);
    if (const auto* d = std::get_if<double>(&c))
        return std::isfinite(*d) ? format_double(*d) : json_quote(format_double(*d));
    return std::to_string(std::get<std::int64_t>(c));
}

// ---------------------------------------------------------------------------
// report tables

struct ReportTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::pair<std::string, Cell>> meta;

    void add_row(std::vector<Cell> cells) {
        if (cells.size() != columns.size()) throw std::logic_error("row width mismatch");
        rows.push_back(std::move(cells));
    }
    void add_meta(std::string key, Cell value) {
        meta.emplace_back(std::move(key), std::move(value));
    }
};

/// Config echo embedded in every report; keys match the config-file syntax,
/// so the echoed block (with the leading `# ` stripped) parses back to the
/// same run.
inline std::vector<std::pair<std::string, Cell>> resolved_meta(const RunConfig& c) {
    std::vector<std::pair<std::string, Cell>> m;
    m.emplace_back("alpha_plus", c.params.alpha_plus);
    m.emplace_back("alpha_minus", c.params.alpha_minus);
    m.emplace_back("nu_plus", c.params.nu_plus);
    m.emplace_back("nu_minus", c.params.nu_minus);
    m.emplace_back("lambda", format_complex(c.Lambda));
    m.emplace_back("box", box_text(c.box));
    m.emplace_back("h", c.h);
    m.emplace_back("lambda_start", c.lambda_grid.start);
    m.emplace_back("lambda_stop", c.lambda_grid.stop);
    m.emplace_back("lambda_step", c.lambda_grid.step);
    std::string taus;
    for (double t : c.tau) {
        if (!taus.empty()) taus += ',';
        taus += format_double(t);
    }
    m.emplace_back("tau", taus);
    m.emplace_back("source_kind",
                   std::string(c.source.kind == SourceSpec::Kind::Gaussian ? "gaussian" : "spline"));
    m.emplace_back("source_m", std::int64_t(c.source.m));
    m.emplace_back("source_n", std::int64_t(c.source.n));
    m.emplace_back("source_center", c.source.center);
    m.emplace_back("source_width", c.source.width);
    m.emplace_back("source_amplitude", format_complex(c.source.amplitude));
    m.emplace_back("circ", std::string(c.circ ? "true" : "false"));
    m.emplace_back("suite", c.suite);
    m.emplace_back("force_regime", c.force_regime);
    m.emplace_back("format", std::string(format_name(c.format)));
    m.emplace_back("out", c.out);
    for (const auto& [key, value] : c.tol) m.emplace_back("tol." + key, value);
    return m;
}

inline void write_csv(std::ostream& os, const ReportTable& t) {
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell_text(row[i]);
        os << '\n';
    }
    for (const auto& [key, value] : t.meta) os << "# " << key << " = " << cell_text(value) << '\n';
}

inline void write_json(std::ostream& os, const ReportTable& t) {
    os << "{\n  \"meta\": {";
    for (std::size_t i = 0; i < t.meta.size(); ++i)
        os << (i ? ",\n    " : "\n    ") << json_quote(t.meta[i].first) << ": "
           << cell_json(t.meta[i].second);
    os << (t.meta.empty() ? "},\n" : "\n  },\n");
    os << "  \"rows\": [";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        os << (r ? ",\n    {" : "\n    {");
        for (std::size_t i = 0; i < t.columns.size(); ++i)
            os << (i ? ", " : "") << json_quote(t.columns[i]) << ": " << cell_json(t.rows[r][i]);
        os << '}';
    }
    os << (t.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
}

inline void write_report(const ReportTable& t, const std::string& path, ReportFormat format) {
    const auto emit = [&](std::ostream& os) {
        if (format == ReportFormat::Csv)
            write_csv(os, t);
        else
            write_json(os, t);
        os.flush();
    };
    if (path.empty()) {
        emit(std::cout);
        return;
    }
    std::ofstream file(path);
    if (!file) throw IoError("cannot open output file: " + path);
    emit(file);
    if (!file) throw IoError("error writing output file: " + path);
}

// ---------------------------------------------------------------------------
// config parsing

namespace iodetail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view v, const std::string& key) {
    const std::string s{trim(v)};
    if (s.empty()) throw ConfigError("empty value for " + key);
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw ConfigError("bad number for " + key + ": " + s);
    return x;
}

inline long parse_int(std::string_view v, const std::string& key) {
    const std::string s{trim(v)};
    if (s.empty()) throw ConfigError("empty value for " + key);
    char* end = nullptr;
    const long x = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) throw ConfigError("bad integer for " + key + ": " + s);
    return x;
}

inline cplx parse_complex(std::string_view v, const std::string& key) {
    const std::string_view t = trim(v);
    const std::size_t comma = t.find(',');
    if (comma == std::string_view::npos) return {parse_double(t, key), 0.0};
    return {parse_double(t.substr(0, comma), key), parse_double(t.substr(comma + 1), key)};
}

inline bool parse_bool(std::string_view v, const std::string& key) {
    const std::string_view t = trim(v);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("bad boolean for " + key + ": " + std::string(t));
}

inline std::vector<double> parse_list(std::string_view v, const std::string& key) {
    std::vector<double> out;
    std::string_view rest = trim(v);
    while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        out.push_back(parse_double(rest.substr(0, comma), key));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    if (out.empty()) throw ConfigError("empty list for " + key);
    return out;
}

}  // namespace iodetail

/// Parses `MxN` (channel counts, so 24x24 covers m,n = 0..23).
inline TruncationBox parse_box(std::string_view text) {
    const std::string_view t = iodetail::trim(text);
    const std::size_t x = t.find('x');
    if (x == std::string_view::npos) throw ConfigError("box must look like MxN: " + std::string(t));
    const long m = iodetail::parse_int(t.substr(0, x), "box");
    const long n = iodetail::parse_int(t.substr(x + 1), "box");
    if (m < 2 || n < 2) throw ConfigError("box must be at least 2x2");
    return TruncationBox{int(m) - 1, int(n) - 1};
}

/// Reads `key = value` lines on top of `base`; unknown keys are errors.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
    using namespace iodetail;
    RunConfig c = std::move(base);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv{line};
        if (const std::size_t hash = sv.find('#'); hash != std::string_view::npos)
            sv = sv.substr(0, hash);
        sv = trim(sv);
        if (sv.empty()) continue;
        const std::size_t eq = sv.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key{trim(sv.substr(0, eq))};
        const std::string_view value = trim(sv.substr(eq + 1));

        if (key == "alpha_plus") c.params.alpha_plus = parse_double(value, key);
        else if (key == "alpha_minus") c.params.alpha_minus = parse_double(value, key);
        else if (key == "nu_plus") c.params.nu_plus = parse_double(value, key);
        else if (key == "nu_minus") c.params.nu_minus = parse_double(value, key);
        else if (key == "lambda") c.Lambda = parse_complex(value, key);
        else if (key == "box") c.box = parse_box(value);
        else if (key == "h") c.h = parse_double(value, key);
        else if (key == "lambda_start") c.lambda_grid.start = parse_double(value, key);
        else if (key == "lambda_stop") c.lambda_grid.stop = parse_double(value, key);
        else if (key == "lambda_step") c.lambda_grid.step = parse_double(value, key);
        else if (key == "tau") c.tau = parse_list(value, key);
        else if (key == "source_kind") {
            if (value == "gaussian") c.source.kind = SourceSpec::Kind::Gaussian;
            else if (value == "spline") c.source.kind = SourceSpec::Kind::Spline;
            else throw ConfigError("source_kind must be gaussian or spline");
        } else if (key == "source_m") c.source.m = int(parse_int(value, key));
        else if (key == "source_n") c.source.n = int(parse_int(value, key));
        else if (key == "source_center") c.source.center = parse_double(value, key);
        else if (key == "source_width") c.source.width = parse_double(value, key);
        else if (key == "source_amplitude") c.source.amplitude = parse_complex(value, key);
        else if (key == "circ") c.circ = parse_bool(value, key);
        else if (key == "suite") c.suite = std::string(value);
        else if (key == "force_regime") c.force_regime = std::string(value);
        else if (key == "format") {
            if (value == "csv") c.format = ReportFormat::Csv;
            else if (value == "json") c.format = ReportFormat::Json;
            else throw ConfigError("format must be csv or json");
        } else if (key == "out") c.out = std::string(value);
        else if (key.starts_with("tol.")) {
            const std::string name = key.substr(4);
            if (!c.tol.count(name)) throw ConfigError("unknown tolerance: " + key);
            c.tol[name] = parse_double(value, key);
        } else {
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key: " + key);
        }
    }
    c.validate();
    return c;
}

inline RunConfig parse_config_file(const std::string& path, RunConfig base = {}) {
    std::ifstream file(path);
    if (!file) throw IoError("cannot open config file: " + path);
    return parse_config(file, std::move(base));
}

}  // namespace oscgraph

#endif
