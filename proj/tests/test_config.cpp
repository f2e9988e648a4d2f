#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pilot_clf/config.hpp"

using namespace pilot_clf;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "pilot_clf_config_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

ErrorKind kind_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;  // stands for "no error"
}

}  // namespace

TEST(ParseConfig, EmptyDocumentGivesRocDefaults) {
    const RunConfig c = parse_config("");
    EXPECT_EQ(c, default_config(Experiment::Roc));
    EXPECT_EQ(c.oversampling, 16u);
    EXPECT_DOUBLE_EQ(c.rolloff, 0.3);
    EXPECT_EQ(c.pulse_span, 6u);
    EXPECT_DOUBLE_EQ(c.symbol_period, 1.0);
    EXPECT_DOUBLE_EQ(c.pilot_amp, 1.0);
    EXPECT_EQ(parse_config("  \n {} \n"), c);
}

TEST(ParseConfig, ExperimentSelectsItsDefaults) {
    const RunConfig c = parse_config(R"({"experiment": "multiclass", "trials": 40})");
    EXPECT_EQ(c.classifier, ClassifierKind::Ml);
    EXPECT_EQ(c.n_max, 4u);
    EXPECT_EQ(c.pilot_length, 16u);
    EXPECT_EQ(c.trials, 40u);
}

TEST(ParseConfig, NTrueAboveNMaxNamesBothFields) {
    try {
        parse_config(R"({"n_true": 3, "n_max": 2})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ValidationError);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("n_true"), std::string::npos);
        EXPECT_NE(msg.find("n_max"), std::string::npos);
    }
}

TEST(ParseConfig, SyntaxErrorReportsLine) {
    try {
        parse_config("{\n  \"m\": 4,\n  \"n_max\": ,\n}");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(ParseConfig, UnknownKeysAndWrongTypes) {
    EXPECT_EQ(kind_of(R"({"antennas": 4})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"m": "four"})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"m": -1})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"alphas": 0.1})"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"([1, 2])"), ErrorKind::ParseError);
    EXPECT_EQ(kind_of(R"({"classifier": "svm"})"), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of(R"({"trials": 10})"), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of(R"({"pilot_length": 6})"), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of(R"({"experiment": "multiclass", "classifier": "glrt"})"), ErrorKind::ValidationError);
    EXPECT_EQ(kind_of(R"({"alpha": 1.0})"), ErrorKind::ValidationError);
}

TEST(ParseConfig, InfiniteSnrSpelledAsString) {
    const RunConfig c = parse_config(R"({"snr_db": "inf", "snr_grid": [0, "inf"], "experiment": "pd_vs_snr"})");
    EXPECT_TRUE(std::isinf(c.snr_db));
    EXPECT_TRUE(std::isinf(c.snr_grid[1]));
    EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(ParseConfig, RoundTripOverRandomValidConfigs) {
    RngStream rng(1, 0);
    const Experiment exps[] = {Experiment::Roc, Experiment::PdVsSnr, Experiment::Ser, Experiment::Multiclass,
                               Experiment::Calibration};
    const ClassifierKind cls[] = {ClassifierKind::Ml, ClassifierKind::Glrt, ClassifierKind::CorrEstimated,
                                  ClassifierKind::CorrIgnored, ClassifierKind::Hml};
    int checked = 0;
    for (int i = 0; i < 300; ++i) {
        RunConfig c = default_config(exps[rng.index(5)]);
        c.m = 1 + rng.index(8);
        c.pilot_length = std::size_t{1} << (2 + rng.index(3));
        c.n_max = 2 + rng.index(c.pilot_length - 1);
        c.n_true = 1 + rng.index(c.n_max);
        c.snr_db = rng.uniform(-20, 20);
        c.classifier = cls[rng.index(5)];
        c.delay_mode = rng.index(2) ? DelayMode::Sync : DelayMode::AsyncUniform;
        c.knowledge = rng.index(2) ? Knowledge::Exact : Knowledge::PoolOnly;
        c.trials = 50 + rng.index(1000);
        c.seed = (static_cast<std::uint64_t>(rng.index(1u << 31)) << 32) | rng.index(1u << 31);
        c.rolloff = rng.uniform(0.1, 1.0);
        c.alpha = rng.uniform(0.01, 0.99);
        c.alphas = {rng.uniform(0.01, 0.5), rng.uniform(0.01, 0.5)};
        c.snr_grid = {rng.uniform(-10, 0), rng.uniform(0, 10)};
        c.em_tol = rng.uniform(1e-9, 1e-3);
        c.workers = rng.index(8);
        c.known_channel = rng.index(2) == 1;
        c.output_path = "run_" + std::to_string(i) + ".csv";
        try {
            validate_config(c);
        } catch (const Error&) {
            continue;
        }
        EXPECT_EQ(parse_config(serialize_config(c)), c);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(EmitReport, RocCsvHasHeaderPlusOneLinePerPoint) {
    RocCurve roc;
    roc.points = {{0.5, 1.0, 1.0}, {1.25, 0.2, 0.9}};
    roc.trials_per_class = 50;
    const RunConfig c = default_config(Experiment::Roc);
    const auto paths = emit_report(Report{roc}, c, scratch("roc.csv"));
    EXPECT_EQ(slurp(paths.csv), "threshold,pf,pd\n0.5,1,1\n1.25,0.2,0.9\n");
    EXPECT_EQ(paths.sidecar.filename(), "roc.json");
    const auto side = nlohmann::json::parse(slurp(paths.sidecar));
    EXPECT_EQ(config_from_json(side.at("config")), c);
    EXPECT_EQ(side.at("version").get<std::string>(), std::string(kVersion));
    EXPECT_EQ(side.at("seed").get<std::uint64_t>(), c.seed);
}

TEST(EmitReport, NineSignificantDigits) { EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333"); }

TEST(EmitReport, MulticlassWritesConfusionTable) {
    MulticlassRow row;
    row.snr_db = 5.0;
    row.rate = 0.75;
    row.trials = 4;
    row.confusion = {{2, 0}, {1, 1}};
    RunConfig c = default_config(Experiment::Multiclass);
    c.n_max = 2;
    const auto paths = emit_report(Report{std::vector<MulticlassRow>{row}}, c, scratch("mc.csv"));
    EXPECT_EQ(slurp(paths.csv), "snr_db,rate\n5,0.75\n");
    EXPECT_EQ(slurp(paths.confusion), "snr_db,n_true,n_chosen,count\n5,1,1,2\n5,1,2,0\n5,2,1,1\n5,2,2,1\n");
}

TEST(EmitReport, UnwritablePath) {
    try {
        emit_report(Report{RocCurve{}}, default_config(Experiment::Roc), "/nonexistent_dir/x/out.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IoError);
    }
}

TEST(EndToEnd, ByteIdenticalAcrossRunsAndWorkerCounts) {
    RunConfig c = parse_config(R"({"trials": 60, "seed": 99})");
    const auto first = emit_report(run_experiment(c), c, scratch("e2e_a.csv"));
    c.workers = 3;
    const auto second = emit_report(run_experiment(c), c, scratch("e2e_b.csv"));
    EXPECT_EQ(slurp(first.csv), slurp(second.csv));
    EXPECT_FALSE(slurp(first.csv).empty());
}
