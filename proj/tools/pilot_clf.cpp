// pilot-clf: run one Monte Carlo experiment and write CSV + JSON sidecar.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pilot_clf.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    std::vector<std::string> sets;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pilot_clf::Error(pilot_clf::ErrorKind::IoError, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// KEY=VALUE; VALUE is read as JSON when it parses, otherwise as a plain string.
void apply_set(nlohmann::json& doc, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw pilot_clf::Error(pilot_clf::ErrorKind::ParseError, "--set expects KEY=VALUE, got " + kv);
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    auto parsed = nlohmann::json::parse(value, nullptr, false);
    doc[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

pilot_clf::RunConfig resolve(const std::string& experiment, const Options& opt) {
    nlohmann::json doc = nlohmann::json::object();
    if (!opt.config_path.empty()) doc = pilot_clf::parse_document(read_file(opt.config_path));
    doc["experiment"] = experiment;
    for (const auto& kv : opt.sets) apply_set(doc, kv);
    if (opt.trials) doc["trials"] = *opt.trials;
    if (opt.workers) doc["workers"] = *opt.workers;
    if (opt.out) doc["output_path"] = *opt.out;
    // Seed: flag, then config, then PILOT_CLF_SEED, then the default.
    if (opt.seed) {
        doc["seed"] = *opt.seed;
    } else if (!doc.contains("seed")) {
        if (const char* env = std::getenv("PILOT_CLF_SEED")) {
            try {
                std::size_t used = 0;
                const std::uint64_t v = std::stoull(env, &used);
                if (used != std::string(env).size()) throw std::invalid_argument(env);
                doc["seed"] = v;
            } catch (const std::exception&) {
                throw pilot_clf::Error(pilot_clf::ErrorKind::ParseError, std::string("PILOT_CLF_SEED is not an integer: ") + env);
            }
        }
    }
    return pilot_clf::config_from_json(doc);
}

void print_summary(const pilot_clf::Report& report) {
    std::visit(
        [](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, pilot_clf::RocCurve>) {
                std::cout << "auc " << pilot_clf::format_number(r.auc) << " over " << r.trials_per_class
                          << " trials per class\n";
            } else if constexpr (std::is_same_v<T, std::vector<pilot_clf::PdPoint>>) {
                for (const auto& p : r)
                    std::cout << "snr " << p.snr_db << " dB: pd " << p.pd << ", pf " << p.pf_emp << "\n";
            } else if constexpr (std::is_same_v<T, pilot_clf::SerReport>) {
                for (const auto& p : r.operating_points)
                    std::cout << "alpha " << p.alpha << ": pf " << p.pf << ", pd " << p.pd << ", ser " << p.ser << "\n";
                std::cout << "ser known system " << r.ser_known_system << ", known channel " << r.ser_known_channel
                          << "\n";
            } else if constexpr (std::is_same_v<T, std::vector<pilot_clf::MulticlassRow>>) {
                for (const auto& row : r) std::cout << "snr " << row.snr_db << " dB: rate " << row.rate << "\n";
            } else {
                for (const auto& row : r.rows)
                    std::cout << "alpha " << row.alpha << ": pf " << row.pf_emp << "\n";
            }
        },
        report);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo classification of SIMO/MIMO transmitters from pilot bursts"};
    app.set_version_flag("--version", std::string(pilot_clf::kVersion));
    app.require_subcommand(1);

    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"roc", "roc"},
        {"pd-vs-snr", "pd_vs_snr"},
        {"ser", "ser"},
        {"multiclass", "multiclass"},
        {"calibrate", "calibration"},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, experiment] : commands) {
        CLI::App* sub = app.add_subcommand(name, "run the " + experiment + " experiment");
        sub->add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--trials", opt.trials, "trial count");
        sub->add_option("--workers", opt.workers, "worker threads (0 = all cores)");
        sub->add_option("--out", opt.out, "CSV output path");
        sub->add_option("--set", opt.sets, "config override KEY=VALUE (repeatable)");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitParse;
    }

    std::string experiment;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) experiment = commands[i].second;

    pilot_clf::RunConfig cfg;
    try {
        cfg = resolve(experiment, opt);
    } catch (const pilot_clf::Error& e) {
        std::cerr << "pilot-clf: " << e.what() << "\n";
        if (e.kind() == pilot_clf::ErrorKind::ValidationError) return kExitValidation;
        if (e.kind() == pilot_clf::ErrorKind::IoError) return kExitRuntime;
        return kExitParse;
    }

    try {
        const pilot_clf::Report report = pilot_clf::run_experiment(cfg);
        const auto paths = pilot_clf::emit_report(report, cfg, cfg.output_path);
        print_summary(report);
        std::cout << "wrote " << paths.csv.string() << " and " << paths.sidecar.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "pilot-clf: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
