// SPDX-License-Identifier: MIT
/**
 * Command layer of the rbbm tool: configuration files, typed keys, schema-
 * checked CSV tables with SHA-256 digests, run manifests and the dispatch of
 * each command to the library.
 *
 * Configuration files hold `key = value` lines with `#` comments.  Values
 * are merged over the defaults of the key registry; unknown keys and values
 * of the wrong type are errors.  Reals accept `inf`, `-inf` and `sqrt2`;
 * optional reals and the family accept `none`; lists are comma separated.
 */
#pragma once

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "bbm_engine.hpp"
#include "errors.hpp"
#include "extreme_stats.hpp"
#include "fkpp_front.hpp"
#include "martingale_lab.hpp"
#include "oracles.hpp"
#include "parallel.hpp"
#include "phase_atlas.hpp"
#include "snapshot_io.hpp"

namespace rbbm::cli {

inline constexpr const char* kVersion = "rbbm 0.1.0";

enum ExitCode { kOk = 0, kValidation = 2, kRuntime = 3 };

// ---------------------------------------------------------------------------
// Key registry and configuration

enum class KeyType { Real, OptReal, Int, Bool, String, Family, RealList };

struct KeySpec {
    std::string name;
    KeyType type;
    std::string def;
    std::string help;
};

inline const std::vector<KeySpec>& key_registry() {
    static const std::vector<KeySpec> keys = {
        {"beta", KeyType::Real, "1", "type-1 branching rate (or family target)"},
        {"sigma2", KeyType::Real, "1", "type-1 diffusion coefficient (or family target)"},
        {"family", KeyType::Family, "none", "approximation family tag or none"},
        {"h", KeyType::Real, "inf", "proximity exponent of the family"},
        {"t", KeyType::Real, "10", "horizon"},
        {"t_grid", KeyType::RealList, "6,8,10,12", "horizons for approx/centering/fit"},
        {"seed", KeyType::Int, "1", "master seed"},
        {"reps", KeyType::Int, "100", "replications (or sampling budget)"},
        {"threads", KeyType::Int, "0", "worker threads, 0 = all cores"},
        {"two_type", KeyType::Bool, "true", "simulate the two-type process"},
        {"prune_depth", KeyType::OptReal, "none", "pruning depth D below the running max"},
        {"max_population", KeyType::Int, "50000000", "cap on particle-events per replication"},
        {"keep_depth", KeyType::Real, "8", "extremal records kept below the max"},
        {"snapshot", KeyType::Bool, "false", "simulate: also write replication 0 in full"},
        {"qs", KeyType::RealList, "0.1,0.5,0.9", "quantile levels of the maximum"},
        {"pin_l", KeyType::OptReal, "none", "fit: pin the speed coefficient"},
        {"R", KeyType::RealList, "2,4,8", "window scales"},
        {"A", KeyType::Real, "2", "offset below the centering / test-function cutoff"},
        {"window_family", KeyType::Family, "B23_plus", "window used when family = none"},
        {"rho", KeyType::Real, "sqrt2", "decorate/laplace: level rho"},
        {"x_grid", KeyType::RealList, "-3,-2,-1,0,1", "laplace: x grid"},
        {"lambda", KeyType::Real, "0.5", "martingale: tilt lambda"},
        {"gibbs_lo", KeyType::Real, "-1", "martingale: G = indicator of [gibbs_lo, gibbs_hi]"},
        {"gibbs_hi", KeyType::Real, "1", "martingale: upper end of the Gibbs profile"},
        {"pde_T", KeyType::Real, "60", "fkpp: horizon"},
        {"dx", KeyType::Real, "0.05", "fkpp: grid step"},
        {"s1", KeyType::Real, "30", "fkpp: start of the speed window"},
        {"s2", KeyType::Real, "60", "fkpp: end of the speed window"},
        {"grid_n", KeyType::Int, "100", "oracle speed: grid resolution"},
        {"x1", KeyType::Real, "1", "oracle bridge: end offset x1"},
        {"x2", KeyType::Real, "1", "oracle bridge: start offset x2"},
        {"bridge_t", KeyType::Real, "2", "oracle bridge: length t"},
        {"paths", KeyType::Int, "100000", "oracle bridge: Monte Carlo paths"},
        {"steps", KeyType::Int, "512", "oracle bridge: monitoring steps"},
        {"xi", KeyType::RealList, "0.5,1,2", "oracle L: xi values"},
        {"L_t_grid", KeyType::RealList, "1e4,1e6,1e8", "oracle L: horizons"},
    };
    return keys;
}

inline const KeySpec* find_key(const std::string& name) {
    for (const auto& k : key_registry())
        if (k.name == name) return &k;
    return nullptr;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_real(const std::string& raw) {
    const std::string s = trim(raw);
    if (s == "sqrt2") return kSqrt2;
    if (s == "-sqrt2") return -kSqrt2;
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || std::isnan(v)) return std::nullopt;
    return v;
}

inline bool valid_value(KeyType type, const std::string& raw) {
    const std::string s = trim(raw);
    switch (type) {
    case KeyType::Real: return parse_real(s).has_value();
    case KeyType::OptReal: return s == "none" || parse_real(s).has_value();
    case KeyType::Int: {
        if (s.empty()) return false;
        char* end = nullptr;
        errno = 0;
        std::strtoll(s.c_str(), &end, 10);
        return errno == 0 && end == s.c_str() + s.size();
    }
    case KeyType::Bool: return s == "true" || s == "false" || s == "1" || s == "0";
    case KeyType::String: return true;
    case KeyType::Family:
        if (s == "none") return true;
        try {
            family_from_string(s);
            return true;
        } catch (const ValidationError&) {
            return false;
        }
    case KeyType::RealList: {
        std::stringstream ss(s);
        std::string item;
        int n = 0;
        while (std::getline(ss, item, ',')) {
            if (!parse_real(item)) return false;
            ++n;
        }
        return n > 0;
    }
    }
    return false;
}

} // namespace detail

class Config {
public:
    Config() {
        for (const auto& k : key_registry()) values_[k.name] = k.def;
    }

    /// Set a key from its text form; `where` prefixes error messages.
    void set(const std::string& key, const std::string& value, const std::string& where = "") {
        const KeySpec* k = find_key(key);
        const std::string pre = where.empty() ? "" : where + ": ";
        if (!k) throw ValidationError(pre + "unknown key '" + key + "'");
        if (!detail::valid_value(k->type, value))
            throw ValidationError(pre + "value '" + value + "' has the wrong type for key '" + key + "'");
        values_[key] = detail::trim(value);
    }

    const std::string& text(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("unknown key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return *detail::parse_real(text(key)); }

    std::optional<double> opt_real(const std::string& key) const {
        if (text(key) == "none") return std::nullopt;
        return real(key);
    }

    std::int64_t integer(const std::string& key) const { return std::stoll(text(key)); }

    std::uint64_t count(const std::string& key) const {
        const auto v = integer(key);
        require(v >= 0, "key '" + key + "' must be >= 0");
        return static_cast<std::uint64_t>(v);
    }

    bool boolean(const std::string& key) const {
        const auto& s = text(key);
        return s == "true" || s == "1";
    }

    std::optional<Family> family(const std::string& key = "family") const {
        if (text(key) == "none") return std::nullopt;
        return family_from_string(text(key));
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(text(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(*detail::parse_real(item));
        return out;
    }

    unsigned threads() const {
        const auto n = count("threads");
        return n == 0 ? default_threads() : static_cast<unsigned>(n);
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Parse `key = value` lines over `base`.
inline Config parse_config(std::istream& is, const std::string& source = "<config>",
                           Config base = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ValidationError(where + ": missing key");
        base.set(key, line.substr(eq + 1), where);
    }
    return base;
}

inline Config load_config(const std::string& path, Config base = {}) {
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open config file '" + path + "'");
    return parse_config(is, path, std::move(base));
}

// ---------------------------------------------------------------------------
// Tables and digests

enum class ColType { Real, Int, Text };

struct Column {
    std::string name;
    std::string unit;
    ColType type = ColType::Real;
};

using Cell = std::variant<double, std::int64_t, std::string>;
using Row = std::vector<Cell>;

struct Table {
    std::string name;
    std::vector<Column> columns;
    std::vector<Row> rows;
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw RuntimeError("SHA-256 digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

inline void check_schema(const Table& t) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const Row& row = t.rows[r];
        if (row.size() != t.columns.size())
            throw ValidationError("table '" + t.name + "' row " + std::to_string(r) +
                                  " has " + std::to_string(row.size()) + " cells, schema has " +
                                  std::to_string(t.columns.size()));
        for (std::size_t c = 0; c < row.size(); ++c)
            if (row[c].index() != static_cast<std::size_t>(t.columns[c].type))
                throw ValidationError("table '" + t.name + "' row " + std::to_string(r) +
                                      " column '" + t.columns[c].name + "' has the wrong type");
    }
}

inline std::string render_cell(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return format_double(*d);
    if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

/// CSV text; header cells read `name (unit)`.
inline std::string render_csv(const Table& t) {
    check_schema(t);
    std::ostringstream os;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        os << (c ? "," : "") << t.columns[c].name << " (" << t.columns[c].unit << ")";
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << render_cell(row[c]);
        os << '\n';
    }
    return os.str();
}

inline nlohmann::json table_json(const Table& t) {
    check_schema(t);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json o = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::string& k = t.columns[c].name;
            if (auto d = std::get_if<double>(&row[c]))
                o[k] = std::isfinite(*d) ? nlohmann::json(*d) : nlohmann::json(format_double(*d));
            else if (auto i = std::get_if<std::int64_t>(&row[c])) o[k] = *i;
            else o[k] = std::get<std::string>(row[c]);
        }
        rows.push_back(std::move(o));
    }
    return rows;
}

inline std::string write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    if (!os || !os.write(bytes.data(), std::streamsize(bytes.size())))
        throw RuntimeError("cannot write '" + path.string() + "'");
    return sha256_hex(bytes);
}

/// Write a table as CSV; the schema is checked before anything is written.
/// Returns the SHA-256 digest of the file content.
inline std::string write_outputs(const Table& t, const std::filesystem::path& path) {
    return write_bytes(path, render_csv(t));
}

// ---------------------------------------------------------------------------
// Commands

struct OutputFile {
    std::string path;
    std::string sha256;
};

struct RunResult {
    int exit_code = kOk;
    std::string message;
    std::vector<Table> tables;
    std::vector<OutputFile> files;
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "classify", "constants", "approx", "centering", "simulate", "fit",
        "localize", "decorate", "laplace", "martingale", "fkpp", "oracle"};
    return names;
}

namespace detail {

inline Column real(std::string n, std::string u = "1") { return {std::move(n), std::move(u), ColType::Real}; }
inline Column integer(std::string n, std::string u = "count") { return {std::move(n), std::move(u), ColType::Int}; }
inline Column text(std::string n) { return {std::move(n), "text", ColType::Text}; }

inline double opt_or_nan(const std::optional<double>& v) {
    return v ? *v : std::numeric_limits<double>::quiet_NaN();
}

inline std::optional<ApproxFamily> family_of(const Config& c) {
    const auto f = c.family();
    if (!f) return std::nullopt;
    ApproxFamily a{Params{c.real("beta"), c.real("sigma2")}, *f, c.real("h")};
    validate(a);
    return a;
}

/// Parameters in force at horizon t: the family's (beta_t, sigma2_t) or the
/// fixed pair.
inline Params params_at(const Config& c, double t) {
    if (auto f = family_of(c)) return make_approximation(*f, t);
    Params p{c.real("beta"), c.real("sigma2")};
    validate(p);
    return p;
}

inline EnsembleRun ensemble_run(const Config& c, double t, Retention retain) {
    EnsembleRun r;
    r.params = params_at(c, t);
    r.horizon = t;
    r.reps = c.count("reps");
    require(r.reps > 0, "reps must be > 0");
    r.seed = c.count("seed");
    r.two_type = c.boolean("two_type");
    r.prune_depth = c.opt_real("prune_depth");
    r.max_population = c.count("max_population");
    r.keep_depth = c.real("keep_depth");
    r.retain = retain;
    r.threads = c.threads();
    return r;
}

inline void require_all_valid(const Ensemble& e) {
    for (const auto& s : e.members)
        if (!s.valid) throw RuntimeError("a replication exceeded max_population; raise the cap");
}

inline RunResult cmd_classify(const Config& c) {
    const Params p{c.real("beta"), c.real("sigma2")};
    validate(p);
    const Region reg = classify(p);
    const auto d = derived_constants(p);
    Table t{"classify",
            {real("beta", "1/time"), real("sigma2", "position^2/time"), text("region"),
             real("v", "position/time"), real("theta", "1/position"), real("b_star", "position/time"),
             real("a_star", "position/time"), real("p_star"), real("v_star", "position/time"),
             real("front_speed", "position/time")},
            {}};
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.rows.push_back({p.beta, p.sigma2, std::string(to_string(reg)), d.v, d.theta,
                      d.star ? d.star->b : nan, d.star ? d.star->a : nan,
                      d.star ? d.star->p : nan, d.star ? d.star->v : nan, front_speed(p)});
    std::ostringstream msg;
    msg << to_string(reg) << "\nv = " << format_double(d.v) << "\ntheta = " << format_double(d.theta);
    if (d.star)
        msg << "\nb* = " << format_double(d.star->b) << "\na* = " << format_double(d.star->a)
            << "\np* = " << format_double(d.star->p) << "\nv* = " << format_double(d.star->v);
    return {kOk, msg.str(), {t}, {}};
}

inline ApproxFamily required_family(const Config& c) {
    auto f = family_of(c);
    if (!f) throw ValidationError("this command needs 'family'");
    return *f;
}

inline RunResult cmd_constants(const Config& c) {
    const ApproxFamily f = required_family(c);
    const double v = c_constant(f);
    Table t{"constants", {text("family"), real("h"), real("beta"), real("sigma2"), real("C")}, {}};
    t.rows.push_back({std::string(to_string(f.family)), f.h, f.target.beta, f.target.sigma2, v});
    return {kOk, "C = " + format_double(v), {t}, {}};
}

inline RunResult cmd_approx(const Config& c) {
    const ApproxFamily f = required_family(c);
    Table t{"approx",
            {real("t", "time"), real("beta_t", "1/time"), real("sigma2_t", "position^2/time"),
             text("region"), real("defining_residual")},
            {}};
    for (double h : c.list("t_grid")) {
        const Params q = make_approximation(f, h);
        t.rows.push_back({h, q.beta, q.sigma2, std::string(to_string(classify(q))),
                          defining_residual(f, q, h)});
    }
    return {kOk, "", {t}, {}};
}

inline RunResult cmd_centering(const Config& c) {
    const auto f = family_of(c);
    Table t{"centering",
            {real("t", "time"), real("leading", "position/time"),
             real("log_coeff", "position"), real("m", "position")},
            {}};
    for (double h : c.list("t_grid")) {
        require(h > 0.0, "t_grid entries must be > 0");
        const Centering m = f ? centering(*f, h) : table1_centering(params_at(c, h));
        t.rows.push_back({h, m.leading, m.log_coeff, m.value(h)});
    }
    return {kOk, "", {t}, {}};
}

inline RunResult cmd_simulate(const Config& c, const std::filesystem::path& out,
                              std::vector<OutputFile>& files) {
    const double T = c.real("t");
    const EnsembleRun run = ensemble_run(c, T, Retention::Summary);
    const Ensemble e = simulate_ensemble(run);
    require_all_valid(e);
    Table reps{"replications",
               {integer("rep", "index"), text("seed"), real("max", "position"),
                integer("count1"), integer("count2"), integer("born"), integer("pruned"),
                integer("events"), integer("valid", "bool")},
               {}};
    SnapshotSummary total;
    for (std::size_t i = 0; i < e.members.size(); ++i) {
        const Snapshot& s = e.members[i];
        total.merge(snapshot_summary(s));
        reps.rows.push_back({std::int64_t(i), std::to_string(replication_seed(run.seed, i)), s.max,
                             std::int64_t(s.count1), std::int64_t(s.count2), std::int64_t(s.born),
                             std::int64_t(s.pruned), std::int64_t(s.events), std::int64_t(s.valid)});
    }
    Table q{"quantiles", {real("q"), real("max_quantile", "position")}, {}};
    const auto qs = c.list("qs");
    const auto vals = max_quantiles(e, qs);
    for (std::size_t i = 0; i < qs.size(); ++i) q.rows.push_back({qs[i], vals[i]});
    if (c.boolean("snapshot")) {
        EngineConfig ec;
        ec.params = run.params;
        ec.horizon = T;
        ec.two_type = run.two_type;
        ec.prune_depth = run.prune_depth;
        ec.max_population = run.max_population;
        ec.seed = replication_seed(run.seed, 0);
        const Snapshot s = simulate_two_type(ec);
        std::ostringstream csv, bin;
        write_snapshot_csv(csv, s);
        write_snapshot_binary(bin, s);
        files.push_back({"simulate_snapshot.csv", write_bytes(out / "simulate_snapshot.csv", csv.str())});
        files.push_back({"simulate_snapshot.bin", write_bytes(out / "simulate_snapshot.bin", bin.str())});
    }
    std::string msg = "replications " + std::to_string(total.replications) + ", max of maxima " +
                      format_double(total.max);
    return {kOk, msg, {reps, q}, {}};
}

inline RunResult cmd_fit(const Config& c) {
    Table pts{"points", {real("t", "time"), real("median_max", "position"), integer("reps")}, {}};
    std::vector<TimePoint> data;
    for (double T : c.list("t_grid")) {
        const Ensemble e = simulate_ensemble(ensemble_run(c, T, Retention::Summary));
        require_all_valid(e);
        const double med = max_quantiles(e, {0.5})[0];
        data.push_back({T, med});
        pts.rows.push_back({T, med, std::int64_t(e.members.size())});
    }
    const LogFit f = fit_log_correction(data, c.opt_real("pin_l"));
    Table fit{"fit",
              {real("l", "position/time"), real("s", "position"), real("c", "position"),
               real("se_l", "position/time"), real("se_s", "position"), real("se_c", "position"),
               real("residual", "position"), integer("l_pinned", "bool")},
              {{f.l, f.s, f.c, f.se_l, f.se_s, f.se_c, f.residual, std::int64_t(f.l_pinned)}}};
    return {kOk, "s = " + format_double(f.s), {pts, fit}, {}};
}

inline RunResult cmd_localize(const Config& c) {
    const double T = c.real("t");
    const auto fam = family_of(c);
    Ensemble e = simulate_ensemble(ensemble_run(c, T, Retention::Extremal));
    require_all_valid(e);
    e.family = fam;
    const Family wf = fam ? fam->family : *c.family("window_family");
    Table t{"localization",
            {text("window_family"), real("h"), real("R"), real("A", "position"),
             real("level", "position"), real("fraction"), integer("outside"), integer("reps")},
            {}};
    for (double R : c.list("R")) {
        const auto r = localization_fraction(e, WindowSpec{wf, c.real("h"), R}, c.real("A"));
        t.rows.push_back({std::string(to_string(wf)), c.real("h"), R, c.real("A"), r.level,
                          r.fraction, std::int64_t(r.outside), std::int64_t(r.reps)});
    }
    return {kOk, "", {t}, {}};
}

inline RunResult cmd_decorate(const Config& c) {
    const double T = c.real("t");
    const auto d = decoration_gaps(params_at(c, T), T, c.real("rho"), c.count("reps"),
                                   c.count("seed"), c.real("keep_depth"), c.threads());
    Table s{"decoration",
            {integer("attempts"), integer("accepted"), real("acceptance"), real("mean_points"),
             real("mean_first_gap", "position"), integer("low_confidence", "bool")},
            {{std::int64_t(d.attempts), std::int64_t(d.accepted), d.acceptance, d.mean_points,
              d.mean_first_gap, std::int64_t(d.low_confidence)}}};
    Table h{"gaps", {real("gap_lo", "position"), real("gap_hi", "position"), real("mean_count")}, {}};
    for (std::size_t i = 0; i < d.gap_histogram.size(); ++i)
        h.rows.push_back({i * d.bin_width, (i + 1) * d.bin_width, d.gap_histogram[i]});
    return {kOk, d.low_confidence ? "fewer than 10 accepted samples (low confidence)" : "", {s, h}, {}};
}

inline RunResult cmd_laplace(const Config& c) {
    const double T = c.real("t");
    const auto rows = laplace_shape(params_at(c, T), T, c.real("rho"), c.list("x_grid"),
                                    c.real("A"), c.count("reps"), c.count("seed"), c.threads());
    Table t{"laplace",
            {real("x", "position"), real("phi_hat"), real("se"), real("shape"), real("ratio")}, {}};
    for (const auto& r : rows) t.rows.push_back({r.x, r.phi_hat, r.se, r.shape, r.ratio});
    return {kOk, "ratio spread " + format_double(ratio_spread(rows)), {t}, {}};
}

inline RunResult cmd_martingale(const Config& c) {
    const double T = c.real("t");
    require(T > 0.0, "martingale needs t > 0");
    const Params p{c.real("beta"), c.real("sigma2")};
    validate(p);
    const double lam = c.real("lambda");
    GibbsFunctionalSpec gau{PiecewiseLinear::indicator(c.real("gibbs_lo"), c.real("gibbs_hi")),
                            0.0, 1.0, lam};
    const double rt = std::pow(T, -0.25);
    GibbsFunctionalSpec mea{PiecewiseLinear::indicator(0.0, 1.0), rt, rt / 2.0, kSqrt2};
    const std::uint64_t n = c.count("reps"), seed = c.count("seed");
    require(n > 1, "martingale needs reps > 1");
    struct Rec { double W, Z, G, M; };
    const auto recs = parallel_map(n, c.threads(), [&](std::uint64_t i) {
        const Snapshot s = simulate_single_type(p, T, replication_seed(seed, i));
        if (!s.valid) throw RuntimeError("replication exceeded the population cap");
        const bool std_bbm = p.beta == 1.0 && p.sigma2 == 1.0;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return Rec{additive_W(s, p, lam), derivative_Z(s, p),
                   std_bbm ? gibbs_gaussian_functional(s, gau, T) : nan,
                   std_bbm ? gibbs_mea_functional(s, mea, T) : nan};
    });
    Table reps{"replications",
               {integer("rep", "index"), real("W"), real("Z", "position"), real("W_gauss"),
                real("W_mea")},
               {}};
    double sw = 0, sw2 = 0, sz = 0, sz2 = 0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        reps.rows.push_back({std::int64_t(i), r.W, r.Z, r.G, r.M});
        sw += r.W, sw2 += r.W * r.W, sz += r.Z, sz2 += r.Z * r.Z;
    }
    const double N = double(n);
    auto se = [&](double s, double s2) { return std::sqrt(std::max(0.0, (s2 - s * s / N) / (N - 1)) / N); };
    Table sum{"summary",
              {real("mean_W"), real("se_W"), real("mean_Z", "position"), real("se_Z", "position"),
               real("gauss_pairing"), real("mea_pairing")},
              {{sw / N, se(sw, sw2), sz / N, se(sz, sz2), gaussian_pairing(gau), meander_pairing(mea)}}};
    return {kOk, "mean W = " + format_double(sw / N) + ", mean Z = " + format_double(sz / N),
            {reps, sum}, {}};
}

inline RunResult cmd_fkpp(const Config& c) {
    const Params p{c.real("beta"), c.real("sigma2")};
    validate(p);
    const PdeConfig pc = make_pde_config(p, c.real("pde_T"), c.real("dx"));
    const PdeResult r = solve_coupled(pc);
    Table fr{"fronts",
             {real("s", "time"), real("front_u", "position"), real("front_v", "position"),
              real("mass_u", "position"), real("mass_v", "position")},
             {}};
    for (const auto& x : r.series) fr.rows.push_back({x.s, x.front_u, x.front_v, x.mass_u, x.mass_v});
    const double s1 = c.real("s1"), s2 = c.real("s2");
    const double su = front_speed(r.series, s1, s2, Field::U);
    const double sv = front_speed(r.series, s1, s2, Field::V);
    const WaveResidual w = wave_residual(r, p, s1, s2);
    Table sum{"summary",
              {real("speed_u", "position/time"), real("speed_v", "position/time"),
               real("residual_u"), real("residual_v"), real("budget")},
              {{su, sv, w.l2, w.l2_v, w.budget}}};
    return {kOk, "u-front speed " + format_double(su), {fr, sum}, {}};
}

inline RunResult cmd_oracle(const Config& c, const std::string& which) {
    if (which == "speed") {
        const Params p{c.real("beta"), c.real("sigma2")};
        const auto s = solve_speed_optimization(p, int(c.count("grid_n")));
        Table t{"speed",
                {real("p"), real("a", "position/time"), real("b", "position/time"),
                 real("value", "position/time"), real("slack1"), real("slack2"), real("grid_step")},
                {{s.p, s.a, s.b, s.value, s.slack1, s.slack2, s.grid_step}}};
        return {kOk, "value = " + format_double(s.value), {t}, {}};
    }
    if (which == "bridge") {
        const double x1 = c.real("x1"), x2 = c.real("x2"), t = c.real("bridge_t");
        const auto mc = bridge_prob_mc(x1, x2, t, c.count("paths"), int(c.count("steps")), c.count("seed"));
        Table tb{"bridge",
                 {real("x1", "position"), real("x2", "position"), real("t", "time"), real("exact"),
                  real("mc_raw"), real("se_raw"), real("mc_corrected"), real("se_corrected")},
                 {{x1, x2, t, bridge_prob(x1, x2, t), mc.raw, mc.raw_se, mc.corrected, mc.corrected_se}}};
        return {kOk, "exact = " + format_double(bridge_prob(x1, x2, t)), {tb}, {}};
    }
    if (which == "transform") {
        const double b = c.real("beta"), T = c.real("t");
        Table tb{"transform", {real("beta", "1/time"), real("t", "time"), real("expected_born")},
                 {{b, T, expected_transform_count(b, T)}}};
        return {kOk, "", {tb}, {}};
    }
    if (which == "L") {
        const ApproxFamily f = required_family(c);
        Table tb{"L",
                 {real("xi"), real("t", "time"), real("L"), real("limit"), real("residual")}, {}};
        for (double xi : c.list("xi"))
            for (const auto& r : L_limit_check(xi, c.list("L_t_grid"), f))
                tb.rows.push_back({r.xi, r.t, r.L, r.limit, r.residual});
        return {kOk, "", {tb}, {}};
    }
    throw ValidationError("unknown oracle '" + which + "' (speed, bridge, transform, L)");
}

inline std::string iso_time(std::chrono::system_clock::time_point tp) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace detail

/// Output directory: explicit value, else $BBM_OUT_DIR, else ./bbm_out.
inline std::filesystem::path resolve_out_dir(const std::string& explicit_dir) {
    if (!explicit_dir.empty()) return explicit_dir;
    if (const char* env = std::getenv("BBM_OUT_DIR"); env && *env) return env;
    return "bbm_out";
}

/// Run one command, write its tables (CSV + JSON summary) and a manifest.
/// Never throws: validation problems give exit code 2, runtime failures 3.
inline RunResult run_command(const std::string& name, const std::vector<std::string>& args,
                             const Config& cfg, const std::filesystem::path& out_dir) {
    const auto start = std::chrono::system_clock::now();
    RunResult res;
    try {
        std::filesystem::create_directories(out_dir);
        std::vector<OutputFile> extra;
        std::string stem = name;
        if (name == "classify") res = detail::cmd_classify(cfg);
        else if (name == "constants") res = detail::cmd_constants(cfg);
        else if (name == "approx") res = detail::cmd_approx(cfg);
        else if (name == "centering") res = detail::cmd_centering(cfg);
        else if (name == "simulate") res = detail::cmd_simulate(cfg, out_dir, extra);
        else if (name == "fit") res = detail::cmd_fit(cfg);
        else if (name == "localize") res = detail::cmd_localize(cfg);
        else if (name == "decorate") res = detail::cmd_decorate(cfg);
        else if (name == "laplace") res = detail::cmd_laplace(cfg);
        else if (name == "martingale") res = detail::cmd_martingale(cfg);
        else if (name == "fkpp") res = detail::cmd_fkpp(cfg);
        else if (name == "oracle") {
            if (args.empty()) throw ValidationError("oracle needs a kind: speed, bridge, transform, L");
            res = detail::cmd_oracle(cfg, args[0]);
            stem += "_" + args[0];
        } else throw ValidationError("unknown command '" + name + "'");
        if (args.size() > (name == "oracle" ? 1u : 0u))
            throw ValidationError("unexpected extra arguments to '" + name + "'");

        // tables: validate all schemas before writing anything
        for (const auto& t : res.tables) check_schema(t);
        nlohmann::json summary = {{"command", name}, {"tables", nlohmann::json::object()}};
        for (const auto& t : res.tables) {
            const std::string file = stem + "_" + t.name + ".csv";
            res.files.push_back({file, write_outputs(t, out_dir / file)});
            summary["tables"][t.name] = table_json(t);
        }
        for (auto& f : extra) res.files.push_back(std::move(f));
        const std::string sfile = stem + "_summary.json";
        res.files.push_back({sfile, write_bytes(out_dir / sfile, summary.dump(2) + "\n")});

        nlohmann::json manifest;
        manifest["command"] = name;
        manifest["args"] = args;
        manifest["config"] = cfg.values();
        manifest["seed"] = cfg.count("seed");
        manifest["version"] = kVersion;
        manifest["started"] = detail::iso_time(start);
        manifest["finished"] = detail::iso_time(std::chrono::system_clock::now());
        manifest["outputs"] = nlohmann::json::array();
        for (const auto& f : res.files)
            manifest["outputs"].push_back({{"file", f.path}, {"sha256", f.sha256}});
        write_bytes(out_dir / (stem + "_manifest.json"), manifest.dump(2) + "\n");
        res.exit_code = kOk;
    } catch (const ValidationError& e) {
        res = {kValidation, std::string("validation error: ") + e.what(), {}, {}};
    } catch (const std::exception& e) {
        res = {kRuntime, std::string("runtime error: ") + e.what(), {}, {}};
    }
    return res;
}

} // namespace rbbm::cli
