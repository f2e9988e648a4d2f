#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pilot_clf/error.hpp"
#include "pilot_clf/experiments.hpp"

namespace pilot_clf {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Experiment { Roc, PdVsSnr, Ser, Multiclass, Calibration };

/// Flat, fully resolved run description. Every field maps to one config key of the same name.
struct RunConfig {
    Experiment experiment = Experiment::Roc;
    std::size_t m = 4;
    std::size_t n_true = 2;
    std::size_t n_max = 2;
    std::size_t pilot_length = 8;
    double snr_db = 0.0;
    DelayMode delay_mode = DelayMode::AsyncUniform;
    ClassifierKind classifier = ClassifierKind::Glrt;
    Knowledge knowledge = Knowledge::Exact;
    PoolKind pool = PoolKind::Hadamard;
    DelayObjective objective = DelayObjective::Concentrated;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    double symbol_period = 1.0;
    double rolloff = 0.3;
    std::size_t pulse_span = 6;
    std::size_t oversampling = 16;
    double pilot_amp = 1.0;
    double data_amp = 1.0;
    double delay_max = 0.5;
    std::size_t em_max_iters = 50;
    double em_tol = 1e-6;
    std::size_t em_restarts = 3;
    double alpha = 0.1;
    std::vector<double> alphas{0.05, 0.1, 0.2};
    std::vector<double> snr_grid{-10.0, -5.0, 0.0, 5.0, 10.0};
    std::size_t data_len = kDefaultDataLength;
    bool known_channel = false;
    std::string output_path = "out.csv";
    std::size_t workers = 1;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;

    TrialSpec trial_spec() const {
        TrialSpec s;
        s.m = m;
        s.n_true = n_true;
        s.n_max = n_max;
        s.pilot_length = pilot_length;
        s.snr_db = snr_db;
        s.delay_mode = delay_mode;
        s.classifier = classifier;
        s.knowledge = knowledge;
        s.pool = pool;
        s.objective = objective;
        s.trials = trials;
        s.seed = seed;
        s.signal.symbol_period = symbol_period;
        s.signal.rolloff = rolloff;
        s.signal.pulse_span = pulse_span;
        s.signal.oversampling = oversampling;
        s.signal.pilot_amp = pilot_amp;
        s.signal.data_amp = data_amp;
        s.signal.delay_max = delay_max;
        s.em.max_iters = em_max_iters;
        s.em.loglik_tol = em_tol;
        s.em.restarts = em_restarts;
        return s;
    }
};

/// Defaults of each experiment before any key is applied.
inline RunConfig default_config(Experiment e) {
    RunConfig c;
    c.experiment = e;
    switch (e) {
        case Experiment::Roc: break;
        case Experiment::PdVsSnr:
            c.delay_mode = DelayMode::Sync;
            c.n_true = 1;
            c.trials = 1000;
            break;
        case Experiment::Ser:
            c.delay_mode = DelayMode::Sync;
            c.n_true = 1;
            c.snr_db = 5.0;
            c.alphas = {0.01, 0.05, 0.1, 0.2, 0.3};
            break;
        case Experiment::Multiclass:
            c.delay_mode = DelayMode::Sync;
            c.classifier = ClassifierKind::Ml;
            c.n_true = 1;
            c.n_max = 4;
            c.pilot_length = 16;
            c.trials = 500;
            break;
        case Experiment::Calibration:
            c.delay_mode = DelayMode::Sync;
            c.n_true = 1;
            c.snr_db = -10.0;
            c.trials = 2000;
            break;
    }
    return c;
}

namespace detail {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<Experiment> {
    static constexpr std::array<std::pair<Experiment, std::string_view>, 5> values{{
        {Experiment::Roc, "roc"},
        {Experiment::PdVsSnr, "pd_vs_snr"},
        {Experiment::Ser, "ser"},
        {Experiment::Multiclass, "multiclass"},
        {Experiment::Calibration, "calibration"},
    }};
};

template <>
struct EnumNames<DelayMode> {
    static constexpr std::array<std::pair<DelayMode, std::string_view>, 2> values{{
        {DelayMode::Sync, "sync"},
        {DelayMode::AsyncUniform, "async_uniform"},
    }};
};

template <>
struct EnumNames<ClassifierKind> {
    static constexpr std::array<std::pair<ClassifierKind, std::string_view>, 5> values{{
        {ClassifierKind::Ml, "ml"},
        {ClassifierKind::Glrt, "glrt"},
        {ClassifierKind::CorrEstimated, "corr_est"},
        {ClassifierKind::CorrIgnored, "corr_ignored"},
        {ClassifierKind::Hml, "hml"},
    }};
};

template <>
struct EnumNames<Knowledge> {
    static constexpr std::array<std::pair<Knowledge, std::string_view>, 2> values{{
        {Knowledge::Exact, "exact"},
        {Knowledge::PoolOnly, "pool_only"},
    }};
};

template <>
struct EnumNames<PoolKind> {
    static constexpr std::array<std::pair<PoolKind, std::string_view>, 2> values{{
        {PoolKind::Hadamard, "hadamard"},
        {PoolKind::Dft, "dft"},
    }};
};

template <>
struct EnumNames<DelayObjective> {
    static constexpr std::array<std::pair<DelayObjective, std::string_view>, 2> values{{
        {DelayObjective::Concentrated, "concentrated"},
        {DelayObjective::ProjectedEnergy, "projected_energy"},
    }};
};

template <typename E>
std::string_view enum_name(E e) {
    for (const auto& [v, name] : EnumNames<E>::values)
        if (v == e) return name;
    return "?";
}

template <typename E>
E enum_from(const std::string& s, std::string_view field) {
    for (const auto& [v, name] : EnumNames<E>::values)
        if (name == s) return v;
    std::string allowed;
    for (const auto& [v, name] : EnumNames<E>::values) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw Error(ErrorKind::ValidationError, std::string(field) + ": '" + s + "' is not one of " + allowed);
}

/// Applies f(name, field) to every config field in a fixed order.
template <typename Config, typename F>
void for_each_field(Config& c, F&& f) {
    f("experiment", c.experiment);
    f("m", c.m);
    f("n_true", c.n_true);
    f("n_max", c.n_max);
    f("pilot_length", c.pilot_length);
    f("snr_db", c.snr_db);
    f("delay_mode", c.delay_mode);
    f("classifier", c.classifier);
    f("knowledge", c.knowledge);
    f("pool", c.pool);
    f("objective", c.objective);
    f("trials", c.trials);
    f("seed", c.seed);
    f("symbol_period", c.symbol_period);
    f("rolloff", c.rolloff);
    f("pulse_span", c.pulse_span);
    f("oversampling", c.oversampling);
    f("pilot_amp", c.pilot_amp);
    f("data_amp", c.data_amp);
    f("delay_max", c.delay_max);
    f("em_max_iters", c.em_max_iters);
    f("em_tol", c.em_tol);
    f("em_restarts", c.em_restarts);
    f("alpha", c.alpha);
    f("alphas", c.alphas);
    f("snr_grid", c.snr_grid);
    f("data_len", c.data_len);
    f("known_channel", c.known_channel);
    f("output_path", c.output_path);
    f("workers", c.workers);
}

using nlohmann::json;

[[noreturn]] inline void bad_type(std::string_view field, std::string_view want) {
    throw Error(ErrorKind::ParseError, "field " + std::string(field) + ": expected " + std::string(want));
}

/// Numbers, or the strings "inf" / "-inf" for infinite SNR.
inline double read_double(const json& j, std::string_view field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    bad_type(field, "a number");
}

inline json write_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline void read_field(const json& j, double& out, std::string_view field) { out = read_double(j, field); }

inline void read_field(const json& j, std::size_t& out, std::string_view field) {
    if (!j.is_number_unsigned()) bad_type(field, "a non-negative integer");
    out = j.get<std::size_t>();
}

inline void read_field(const json& j, bool& out, std::string_view field) {
    if (!j.is_boolean()) bad_type(field, "true or false");
    out = j.get<bool>();
}

inline void read_field(const json& j, std::string& out, std::string_view field) {
    if (!j.is_string()) bad_type(field, "a string");
    out = j.get<std::string>();
}

inline void read_field(const json& j, std::vector<double>& out, std::string_view field) {
    if (!j.is_array()) bad_type(field, "an array of numbers");
    out.clear();
    for (const auto& v : j) out.push_back(read_double(v, field));
}

template <typename E>
    requires std::is_enum_v<E>
void read_field(const json& j, E& out, std::string_view field) {
    if (!j.is_string()) bad_type(field, "a string");
    out = enum_from<E>(j.get<std::string>(), field);
}

template <typename T>
json write_field(const T& v) {
    if constexpr (std::is_enum_v<T>) {
        return std::string(enum_name(v));
    } else if constexpr (std::is_same_v<T, double>) {
        return write_double(v);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
        json a = json::array();
        for (double x : v) a.push_back(write_double(x));
        return a;
    } else {
        return v;
    }
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(offset, text.size()); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace detail

/// Parses a JSON document; blank text is an empty object.
inline nlohmann::json parse_document(std::string_view text) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return nlohmann::json::object();
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw Error(ErrorKind::ParseError, "line 1: config must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t line = detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + e.what());
    }
}

/// Field-level and cross-field checks; each message names the offending keys.
inline void validate_config(const RunConfig& c) {
    const auto fail = [](const std::string& msg) { throw Error(ErrorKind::ValidationError, msg); };
    if (c.m < 1) fail("m must be >= 1");
    if (c.n_max < 1) fail("n_max must be >= 1");
    if (c.n_true < 1) fail("n_true must be >= 1");
    if (c.n_true > c.n_max) fail("n_true (" + std::to_string(c.n_true) + ") exceeds n_max (" + std::to_string(c.n_max) + ")");
    if (c.n_max > c.pilot_length) fail("n_max exceeds pilot_length");
    if (c.trials < 1) fail("trials must be >= 1");
    if (std::isnan(c.snr_db)) fail("snr_db is NaN");
    if (!(c.em_tol > 0.0)) fail("em_tol must be > 0");
    if (c.em_max_iters < 1) fail("em_max_iters must be >= 1");
    if (c.em_restarts < 1) fail("em_restarts must be >= 1");
    if (c.data_len < 1) fail("data_len must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha must lie in (0, 1)");
    for (double a : c.alphas)
        if (!(a > 0.0 && a < 1.0)) fail("alphas entries must lie in (0, 1)");
    for (double s : c.snr_grid)
        if (std::isnan(s)) fail("snr_grid holds NaN");
    if (c.output_path.empty()) fail("output_path is empty");
    const bool needs_alphas = c.experiment == Experiment::Ser || c.experiment == Experiment::Calibration;
    const bool needs_grid = c.experiment == Experiment::PdVsSnr || c.experiment == Experiment::Multiclass;
    if (needs_alphas && c.alphas.empty()) fail("alphas is empty");
    if (needs_grid && c.snr_grid.empty()) fail("snr_grid is empty");
    if ((c.experiment == Experiment::Roc) && c.trials < kMinRocTrials) {
        fail("trials must be >= " + std::to_string(kMinRocTrials) + " per class for roc");
    }
    if (c.experiment != Experiment::Multiclass && c.n_max < 2) fail("n_max must be >= 2 for a SIMO/MIMO experiment");
    if (c.experiment == Experiment::Multiclass && c.classifier == ClassifierKind::Glrt) {
        fail("classifier glrt is binary; multiclass needs ml, corr or hml");
    }
    if (c.experiment == Experiment::Ser && c.n_max > 9) fail("n_max too large for exhaustive QPSK detection");
    if (c.classifier == ClassifierKind::Hml && std::isinf(c.snr_db)) fail("classifier hml needs finite snr_db");

    TrialSpec s = c.trial_spec();
    if (c.experiment != Experiment::Multiclass) {
        s.layout = HypothesisLayout::Binary;
        s.n_true = 1;
    } else {
        s.layout = HypothesisLayout::Full;
    }
    if (c.experiment != Experiment::Roc && c.experiment != Experiment::Multiclass) {
        s.delay_mode = DelayMode::Sync;
        s.classifier = ClassifierKind::Glrt;
    }
    try {
        s.validate();
        make_pool(s.pool, s.pilot_length);
    } catch (const Error& e) {
        fail(e.what());
    }
}

/// Applies the keys of an object over the experiment defaults; unknown keys and wrong types are parse errors.
inline RunConfig config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::ParseError, "config must be a JSON object");
    Experiment e = Experiment::Roc;
    if (doc.contains("experiment")) detail::read_field(doc.at("experiment"), e, "experiment");
    RunConfig c = default_config(e);

    std::vector<std::string> known;
    detail::for_each_field(c, [&](std::string_view name, auto& field) {
        known.emplace_back(name);
        if (doc.contains(name)) detail::read_field(doc.at(std::string(name)), field, name);
    });
    for (const auto& [key, value] : doc.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(ErrorKind::ParseError, "unknown field " + key);
        }
    }
    validate_config(c);
    return c;
}

inline RunConfig parse_config(std::string_view text) { return config_from_json(parse_document(text)); }

inline nlohmann::json config_to_json(const RunConfig& config) {
    nlohmann::json j = nlohmann::json::object();
    RunConfig c = config;
    detail::for_each_field(c, [&](std::string_view name, const auto& field) { j[std::string(name)] = detail::write_field(field); });
    return j;
}

inline std::string serialize_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

// ---- reports ----

struct CalibrationReport {
    std::vector<CalibrationRow> rows;
};

using Report = std::variant<RocCurve, std::vector<PdPoint>, SerReport, std::vector<MulticlassRow>, CalibrationReport>;

/// Runs the experiment a validated config describes.
inline Report run_experiment(const RunConfig& c) {
    validate_config(c);
    const TrialSpec s = c.trial_spec();
    switch (c.experiment) {
        case Experiment::Roc: return run_roc(s, c.workers);
        case Experiment::PdVsSnr: return run_pd_vs_snr(s, c.alpha, c.snr_grid, c.workers);
        case Experiment::Ser: return run_ser(s, c.data_len, c.alphas, c.workers);
        case Experiment::Multiclass: return run_multiclass(s, c.snr_grid, c.workers);
        case Experiment::Calibration: return CalibrationReport{run_calibration(s, c.alphas, c.known_channel, c.workers)};
    }
    throw Error(ErrorKind::InvalidArgument, "unknown experiment");
}

/// %.9g, with inf and nan spelled out.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline std::string csv_row(std::initializer_list<double> values) {
    std::string line;
    for (double v : values) {
        if (!line.empty()) line += ',';
        line += format_number(v);
    }
    return line + '\n';
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::IoError, "cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::IoError, "cannot move output into " + path.string());
    }
}

inline std::filesystem::path sibling(const std::filesystem::path& path, const std::string& suffix) {
    std::filesystem::path p = path;
    if (p.extension() == ".csv") p.replace_extension();
    return p.string() + suffix;
}

}  // namespace detail

struct RenderedReport {
    std::string csv;
    std::string confusion_csv;  // multiclass only
    nlohmann::json trial_counts;
    std::string notes;
};

inline RenderedReport render_report(const Report& report) {
    RenderedReport out;
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, RocCurve>) {
                out.csv = "threshold,pf,pd\n";
                for (const auto& p : r.points) out.csv += detail::csv_row({p.threshold, p.pf, p.pd});
                out.trial_counts = {{"per_class", r.trials_per_class}, {"auc", r.auc}};
            } else if constexpr (std::is_same_v<T, std::vector<PdPoint>>) {
                out.csv = "snr_db,pd,pf_emp\n";
                nlohmann::json counts = nlohmann::json::array();
                for (const auto& p : r) {
                    out.csv += detail::csv_row({p.snr_db, p.pd, p.pf_emp});
                    counts.push_back(p.trials);
                }
                out.trial_counts = {{"per_class", counts}};
            } else if constexpr (std::is_same_v<T, SerReport>) {
                out.csv = "pf,pd,ser,ser_known_system,ser_known_channel\n";
                for (const auto& p : r.operating_points) {
                    out.csv += detail::csv_row({p.pf, p.pd, p.ser, r.ser_known_system, r.ser_known_channel});
                }
                nlohmann::json alphas = nlohmann::json::array();
                for (const auto& p : r.operating_points) alphas.push_back(p.alpha);
                out.trial_counts = {{"per_class", r.trials_per_class}, {"symbols", r.symbols}, {"alphas", alphas}};
                out.notes = "modulation " + r.modulation;
            } else if constexpr (std::is_same_v<T, std::vector<MulticlassRow>>) {
                out.csv = "snr_db,rate\n";
                out.confusion_csv = "snr_db,n_true,n_chosen,count\n";
                nlohmann::json counts = nlohmann::json::array();
                for (const auto& row : r) {
                    out.csv += detail::csv_row({row.snr_db, row.rate});
                    counts.push_back(row.trials);
                    for (std::size_t a = 0; a < row.confusion.size(); ++a)
                        for (std::size_t b = 0; b < row.confusion[a].size(); ++b) {
                            out.confusion_csv += detail::csv_row({row.snr_db, static_cast<double>(a + 1),
                                                                  static_cast<double>(b + 1),
                                                                  static_cast<double>(row.confusion[a][b])});
                        }
                }
                out.trial_counts = {{"per_point", counts}};
            } else {
                out.csv = "alpha,pf_emp,lambda_mean,lambda_var,mu_tilde,sigma2_tilde\n";
                std::size_t n = 0;
                for (const auto& row : r.rows) {
                    out.csv += detail::csv_row({row.alpha, row.pf_emp, row.lambda_mean, row.lambda_var, row.mu_tilde,
                                                row.sigma2_tilde});
                    n = row.trials;
                }
                out.trial_counts = {{"simo", n}};
            }
        },
        report);
    return out;
}

/// Paths written by emit_report for a given CSV path.
struct ReportPaths {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
    std::filesystem::path confusion;
};

inline ReportPaths report_paths(const std::filesystem::path& csv) {
    return {csv, detail::sibling(csv, ".json"), detail::sibling(csv, ".confusion.csv")};
}

/// CSV table plus JSON sidecar (and a confusion table for multiclass), each written atomically.
inline ReportPaths emit_report(const Report& report, const RunConfig& config, const std::filesystem::path& path) {
    const RenderedReport r = render_report(report);
    const ReportPaths paths = report_paths(path);
    nlohmann::json side;
    side["config"] = config_to_json(config);
    side["seed"] = config.seed;
    side["trials"] = r.trial_counts;
    side["version"] = std::string(kVersion);
    if (!r.notes.empty()) side["notes"] = r.notes;

    detail::atomic_write(paths.csv, r.csv);
    detail::atomic_write(paths.sidecar, side.dump(2) + "\n");
    if (!r.confusion_csv.empty()) detail::atomic_write(paths.confusion, r.confusion_csv);
    return paths;
}

}  // namespace pilot_clf
