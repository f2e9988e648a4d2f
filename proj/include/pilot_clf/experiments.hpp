#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pilot_clf/classify.hpp"
#include "pilot_clf/error.hpp"
#include "pilot_clf/hml.hpp"
#include "pilot_clf/numerics.hpp"
#include "pilot_clf/pilots.hpp"
#include "pilot_clf/waveform.hpp"

namespace pilot_clf {

enum class DelayMode { Sync, AsyncUniform };
enum class ClassifierKind { Ml, Glrt, CorrEstimated, CorrIgnored, Hml };
/// Binary: hypotheses {1, n_max}. Full: hypotheses 1..n_max.
enum class HypothesisLayout { Binary, Full };

struct TrialSpec {
    std::size_t m = 4;
    std::size_t n_true = 2;
    std::size_t n_max = 2;
    std::size_t pilot_length = 8;
    double snr_db = 0.0;
    DelayMode delay_mode = DelayMode::AsyncUniform;
    ClassifierKind classifier = ClassifierKind::Glrt;
    Knowledge knowledge = Knowledge::Exact;
    PoolKind pool = PoolKind::Hadamard;
    HypothesisLayout layout = HypothesisLayout::Binary;
    DelayObjective objective = DelayObjective::Concentrated;
    std::size_t trials = 200;
    std::uint64_t seed = 1;
    SignalConfig signal;
    EmConfig em;

    void validate() const {
        if (trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
        if (m < 1) throw Error(ErrorKind::InvalidArgument, "m must be >= 1");
        if (n_true < 1 || n_true > n_max) throw Error(ErrorKind::InvalidArgument, "need 1 <= n_true <= n_max");
        if (n_max > pilot_length) throw Error(ErrorKind::TooManyAntennas, "n_max exceeds the pilot length");
        if (layout == HypothesisLayout::Binary) {
            if (n_max < 2) throw Error(ErrorKind::InvalidArgument, "binary layout needs n_max >= 2");
            if (n_true != 1 && n_true != n_max) {
                throw Error(ErrorKind::InvalidArgument, "binary layout needs n_true in {1, n_max}");
            }
        }
        if (classifier == ClassifierKind::Glrt && layout != HypothesisLayout::Binary) {
            throw Error(ErrorKind::InvalidArgument, "GLRT needs the binary layout");
        }
        if ((classifier == ClassifierKind::CorrEstimated || classifier == ClassifierKind::CorrIgnored) &&
            delay_mode == DelayMode::Sync) {
            throw Error(ErrorKind::InvalidArgument, "the delay-aware correlation variants are asynchronous");
        }
        if (std::isnan(snr_db)) throw Error(ErrorKind::InvalidArgument, "snr_db is NaN");
        if (classifier == ClassifierKind::Hml && std::isinf(snr_db)) {
            throw Error(ErrorKind::InvalidArgument, "HML needs finite SNR");
        }
        signal.validate();
        em.validate();
    }
};

struct TrialRecord {
    std::uint64_t stream = 0;
    std::size_t n_true = 0;
    std::size_t chosen_antennas = 0;
    bool decide_mimo = false;
    double statistic = 0.0;  // binary: score(MIMO) - score(SIMO); full: score of the chosen hypothesis
    std::vector<double> scores;
    std::optional<double> tau_true;
    std::vector<std::optional<double>> tau_hat;
    double noise_var = 0.0;
    ComplexMatrix h_true;
    ComplexMatrix pilots_true;
    bool non_convergence = false;

    bool correct() const { return chosen_antennas == n_true; }
    double realized_snr_db() const { return pilot_clf::realized_snr_db(h_true, pilots_true, noise_var); }

    friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/**
 * fn(i) for i in [0, count) on `workers` threads (0 picks the hardware count).
 *
 * Results land in slot i, so the output never depends on scheduling. The
 * exception of the lowest failing index is rethrown.
 */
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, Fn fn) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    std::vector<std::optional<T>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<T> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

namespace detail {

constexpr std::uint64_t kHmlTag = 0x484d4c;
constexpr std::uint64_t kTruthTag = 0x7472757468;
constexpr std::uint64_t kDataTag = 0x64617461;

inline std::uint64_t point_stream(std::size_t point, std::size_t trial) {
    return (static_cast<std::uint64_t>(point) << 32) | static_cast<std::uint64_t>(trial);
}

inline HypothesisSet trial_hypotheses(const TrialSpec& spec, const PilotPool& pool) {
    if (spec.layout == HypothesisLayout::Binary) {
        return binary_hypotheses(pool, spec.n_max, spec.signal.pilot_amp, spec.knowledge);
    }
    return build_hypotheses(pool, spec.n_max, spec.signal.pilot_amp, spec.knowledge);
}

struct SyncObservation {
    ComplexMatrix h;
    ComplexMatrix r;
    double noise_var = 0.0;
    ComplexMatrix y;
};

inline SyncObservation draw_sync(const PilotPool& pool, std::size_t m, std::size_t n_true, double amp, double snr_db,
                                 RngStream& rng) {
    SyncObservation obs;
    obs.r = pilot_matrix(pool, n_true, amp);
    obs.h = sample_complex_gaussian(m, n_true, 1.0, rng);
    obs.noise_var = calibrate_noise_for_snr(obs.h, obs.r, snr_db);
    obs.y = obs.h * obs.r + sample_complex_gaussian(m, pool.length(), obs.noise_var, rng);
    return obs;
}

inline TrialRecord run_trial_at(const TrialSpec& spec, std::size_t n_true, double snr_db, std::uint64_t stream) {
    RngStream rng(spec.seed, stream);
    const PilotPool pool = make_pool(spec.pool, spec.pilot_length);
    const HypothesisSet hyp = trial_hypotheses(spec, pool);

    TrialRecord rec;
    rec.stream = stream;
    rec.n_true = n_true;
    rec.pilots_true = pilot_matrix(pool, n_true, spec.signal.pilot_amp);
    rec.h_true = sample_complex_gaussian(spec.m, n_true, 1.0, rng);
    rec.noise_var = calibrate_noise_for_snr(rec.h_true, rec.pilots_true, snr_db);

    ClassificationResult res;
    if (spec.delay_mode == DelayMode::Sync) {
        const ComplexMatrix y =
            rec.h_true * rec.pilots_true + sample_complex_gaussian(spec.m, spec.pilot_length, rec.noise_var, rng);
        switch (spec.classifier) {
            case ClassifierKind::Ml:
            case ClassifierKind::Glrt: res = ml_classify_sync(y, hyp); break;
            case ClassifierKind::Hml: {
                RngStream em_rng = rng.derive(kHmlTag);
                HmlResult h = hml_classify_sync(y, hyp, spec.em, rec.noise_var, em_rng);
                rec.non_convergence = h.diagnostics.non_convergence;
                res = std::move(h.classification);
                break;
            }
            default: res = corr_classify(y, hyp); break;
        }
    } else {
        SignalConfig cfg = spec.signal;
        cfg.noise_var = rec.noise_var;
        const double tau = snap_to_grid(rng.uniform(0.0, cfg.delay_max), cfg);
        rec.tau_true = tau;
        const OversampledBurst burst = synthesize_burst(rec.h_true, rec.pilots_true, 1.0, tau, cfg, rng);
        const auto grid = spec.classifier == ClassifierKind::CorrIgnored ? std::vector<double>{0.0} : delay_grid(cfg);
        const FilterBank bank = matched_filter_bank(burst, grid, spec.pilot_length);
        switch (spec.classifier) {
            case ClassifierKind::Ml:
            case ClassifierKind::Glrt: res = ml_classify_async(bank, hyp, spec.objective); break;
            case ClassifierKind::CorrEstimated: res = corr_classify(bank, hyp, CorrMode::AsyncEstimated); break;
            case ClassifierKind::CorrIgnored: res = corr_classify(bank, hyp, CorrMode::AsyncIgnored); break;
            case ClassifierKind::Hml: {
                RngStream em_rng = rng.derive(kHmlTag);
                HmlResult h = hml_classify_async(bank, hyp, spec.em, em_rng);
                rec.non_convergence = h.diagnostics.non_convergence;
                res = std::move(h.classification);
                break;
            }
        }
    }

    rec.scores = res.scores;
    rec.tau_hat = res.tau_hat;
    rec.chosen_antennas = res.chosen_antennas;
    rec.decide_mimo = res.chosen_antennas > 1;
    rec.statistic = spec.layout == HypothesisLayout::Binary ? res.scores[1] - res.scores[0] : res.scores[res.chosen];
    return rec;
}

}  // namespace detail

/// One trial, reproducible from (spec.seed, trial_index) alone.
inline TrialRecord run_trial(const TrialSpec& spec, std::uint64_t trial_index) {
    spec.validate();
    return detail::run_trial_at(spec, spec.n_true, spec.snr_db, trial_index);
}

struct RocPoint {
    double threshold = 0.0;
    double pf = 0.0;
    double pd = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // ascending threshold
    double auc = 0.0;
    std::size_t trials_per_class = 0;
};

inline constexpr std::size_t kMinRocTrials = 50;

/// ROC of the rule "statistic >= threshold" swept over every pooled value; AUC by trapezoid from (0,0) to (1,1).
inline RocCurve compute_roc(const std::vector<double>& simo, const std::vector<double>& mimo) {
    if (simo.empty() || mimo.empty()) throw Error(ErrorKind::InsufficientTrials, "both classes need trials");
    std::vector<double> s = simo;
    std::vector<double> d = mimo;
    std::sort(s.begin(), s.end());
    std::sort(d.begin(), d.end());
    std::vector<double> thresholds = s;
    thresholds.insert(thresholds.end(), d.begin(), d.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const auto rate = [](const std::vector<double>& sorted, double t) {
        const auto above = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
        return static_cast<double>(above) / static_cast<double>(sorted.size());
    };

    RocCurve roc;
    roc.trials_per_class = std::min(simo.size(), mimo.size());
    for (double t : thresholds) roc.points.push_back({t, rate(s, t), rate(d, t)});

    std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
    for (const auto& p : roc.points) pts.emplace_back(p.pf, p.pd);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) {
        roc.auc += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
    }
    return roc;
}

/// Hanley-McNeil standard error of an empirical AUC.
inline double auc_standard_error(double auc, std::size_t n_pos, std::size_t n_neg) {
    const double q1 = auc / (2.0 - auc);
    const double q2 = 2.0 * auc * auc / (1.0 + auc);
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    const double var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) + (nn - 1.0) * (q2 - auc * auc)) / (np * nn);
    return std::sqrt(std::max(var, 0.0));
}

/// Standard deviation of a binomial rate estimate; p is clamped away from 0 and 1 by half a count.
inline double binomial_sigma(double p, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double pc = std::clamp(p, 0.5 / nn, 1.0 - 0.5 / nn);
    return std::sqrt(pc * (1.0 - pc) / nn);
}

/// Interpolated Pd at a false-alarm rate on the ROC.
inline double pd_at_pf(const RocCurve& roc, double pf) {
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
    for (const auto& p : roc.points) pts.emplace_back(p.pf, p.pd);
    std::sort(pts.begin(), pts.end());
    double best = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const auto [x0, y0] = pts[i - 1];
        const auto [x1, y1] = pts[i];
        if (x1 <= pf) best = std::max(best, y1);
        else if (x0 <= pf && x1 > x0) best = std::max(best, y0 + (y1 - y0) * (pf - x0) / (x1 - x0));
    }
    return best;
}

struct TrialRun {
    std::vector<TrialRecord> simo;
    std::vector<TrialRecord> mimo;
};

/// spec.trials SIMO-truth trials (streams 0..T-1) and as many MIMO-truth trials (streams T..2T-1).
inline TrialRun run_binary_trials(const TrialSpec& spec, std::size_t workers = 1) {
    TrialSpec s = spec;
    s.layout = HypothesisLayout::Binary;
    s.n_true = 1;
    s.validate();
    const std::size_t t = s.trials;
    auto records = parallel_map<TrialRecord>(2 * t, workers, [&](std::size_t i) {
        return detail::run_trial_at(s, i < t ? 1 : s.n_max, s.snr_db, i);
    });
    TrialRun run;
    run.simo.assign(std::make_move_iterator(records.begin()), std::make_move_iterator(records.begin() + t));
    run.mimo.assign(std::make_move_iterator(records.begin() + t), std::make_move_iterator(records.end()));
    return run;
}

inline RocCurve run_roc(const TrialSpec& spec, std::size_t workers = 1) {
    if (spec.trials < kMinRocTrials) {
        throw Error(ErrorKind::InsufficientTrials, std::to_string(spec.trials) + " trials per class, need " +
                                                       std::to_string(kMinRocTrials));
    }
    const TrialRun run = run_binary_trials(spec, workers);
    std::vector<double> s;
    std::vector<double> d;
    for (const auto& r : run.simo) s.push_back(r.statistic);
    for (const auto& r : run.mimo) d.push_back(r.statistic);
    return compute_roc(s, d);
}

struct PdPoint {
    double snr_db = 0.0;
    double pd = 0.0;
    double pf_emp = 0.0;
    std::size_t trials = 0;  // per class
};

/// Synchronous GLRT whose threshold is designed per trial from the LS SIMO channel estimate.
inline std::vector<PdPoint> run_pd_vs_snr(const TrialSpec& spec, double alpha, const std::vector<double>& snr_grid,
                                          std::size_t workers = 1) {
    TrialSpec s = spec;
    s.layout = HypothesisLayout::Binary;
    s.n_true = 1;
    s.classifier = ClassifierKind::Glrt;
    s.delay_mode = DelayMode::Sync;
    s.validate();
    gaussian_tail_inverse(alpha);
    const PilotPool pool = make_pool(s.pool, s.pilot_length);
    const ComplexMatrix r_s = pilot_matrix(pool, 1, s.signal.pilot_amp);
    const ComplexMatrix r_m = pilot_matrix(pool, s.n_max, s.signal.pilot_amp);
    const std::size_t t = s.trials;

    std::vector<PdPoint> out;
    for (std::size_t p = 0; p < snr_grid.size(); ++p) {
        const auto decisions = parallel_map<int>(2 * t, workers, [&](std::size_t i) {
            RngStream rng(s.seed, detail::point_stream(p, i));
            const std::size_t n_true = i < t ? 1 : s.n_max;
            const auto obs = detail::draw_sync(pool, s.m, n_true, s.signal.pilot_amp, snr_grid[p], rng);
            return glrt_detect_sync(obs.y, r_m, r_s, alpha, obs.noise_var).decide_mimo ? 1 : 0;
        });
        std::size_t fa = 0;
        std::size_t det = 0;
        for (std::size_t i = 0; i < t; ++i) fa += static_cast<std::size_t>(decisions[i]);
        for (std::size_t i = t; i < 2 * t; ++i) det += static_cast<std::size_t>(decisions[i]);
        out.push_back({snr_grid[p], static_cast<double>(det) / static_cast<double>(t),
                       static_cast<double>(fa) / static_cast<double>(t), t});
    }
    return out;
}

struct CalibrationRow {
    double alpha = 0.0;
    double pf_emp = 0.0;
    double lambda_mean = 0.0;
    double lambda_var = 0.0;
    double mu_tilde = 0.0;      // averaged over trials
    double sigma2_tilde = 0.0;  // averaged over trials
    std::size_t trials = 0;
};

/// SIMO-only synchronous trials; each alpha's threshold comes from the LS (or, if requested, true) SIMO channel.
inline std::vector<CalibrationRow> run_calibration(const TrialSpec& spec, const std::vector<double>& alphas,
                                                   bool known_channel = false, std::size_t workers = 1) {
    TrialSpec s = spec;
    s.layout = HypothesisLayout::Binary;
    s.n_true = 1;
    s.classifier = ClassifierKind::Glrt;
    s.delay_mode = DelayMode::Sync;
    s.validate();
    for (double a : alphas) gaussian_tail_inverse(a);
    const PilotPool pool = make_pool(s.pool, s.pilot_length);
    const ComplexMatrix r_s = pilot_matrix(pool, 1, s.signal.pilot_amp);
    const ComplexMatrix r_m = pilot_matrix(pool, s.n_max, s.signal.pilot_amp);

    struct Sample {
        double lambda;
        std::vector<ThresholdModel> models;
    };
    const auto samples = parallel_map<Sample>(s.trials, workers, [&](std::size_t i) {
        RngStream rng(s.seed, i);
        const auto obs = detail::draw_sync(pool, s.m, 1, s.signal.pilot_amp, s.snr_db, rng);
        Sample out{glrt_sync(obs.y, r_m, r_s), {}};
        const ComplexMatrix h_s = known_channel ? obs.h : ls_channel(obs.y, r_s);
        for (double a : alphas) out.models.push_back(glrt_threshold(a, r_m, r_s, h_s, obs.noise_var));
        return out;
    });

    const double n = static_cast<double>(s.trials);
    double mean = 0.0;
    for (const auto& x : samples) mean += x.lambda;
    mean /= n;
    double var = 0.0;
    for (const auto& x : samples) var += (x.lambda - mean) * (x.lambda - mean);
    var = s.trials > 1 ? var / (n - 1.0) : 0.0;

    std::vector<CalibrationRow> rows;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        CalibrationRow row;
        row.alpha = alphas[k];
        row.trials = s.trials;
        row.lambda_mean = mean;
        row.lambda_var = var;
        std::size_t fa = 0;
        for (const auto& x : samples) {
            fa += x.lambda >= x.models[k].tau_g ? 1 : 0;
            row.mu_tilde += x.models[k].mu_tilde;
            row.sigma2_tilde += x.models[k].sigma2_tilde;
        }
        row.pf_emp = static_cast<double>(fa) / n;
        row.mu_tilde /= n;
        row.sigma2_tilde /= n;
        rows.push_back(row);
    }
    return rows;
}

/// Gray-free QPSK alphabet (+-1 +-j) / sqrt(2), indexed 0..3.
inline cplx qpsk_symbol(std::size_t index) {
    const double a = 1.0 / std::sqrt(2.0);
    return {(index & 1) ? -a : a, (index & 2) ? -a : a};
}

inline constexpr std::size_t kMaxConstellationCandidates = 1000000;

/// Exhaustive vector ML detection: column l -> argmin_x ||y[l] - gain H x||^2 over QPSK^n.
inline std::vector<std::vector<std::size_t>> detect_qpsk(const ComplexMatrix& y, const ComplexMatrix& h, double gain) {
    const std::size_t n = h.cols();
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) {
        count *= 4;
        if (count > kMaxConstellationCandidates) {
            throw Error(ErrorKind::ConstellationTooLarge, "4^" + std::to_string(n) + " candidates");
        }
    }
    if (y.rows() != h.rows()) throw Error(ErrorKind::DimensionMismatch, "Y " + y.shape() + " vs H " + h.shape());

    ComplexMatrix cand(count, n);
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < n; ++i) cand(c, i) = qpsk_symbol((c >> (2 * i)) & 3);
    const ComplexMatrix images = (gain * h) * cand.transpose();  // m x count

    std::vector<std::vector<std::size_t>> out(n, std::vector<std::size_t>(y.cols()));
    for (std::size_t l = 0; l < y.cols(); ++l) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < count; ++c) {
            double d = 0.0;
            for (std::size_t q = 0; q < y.rows(); ++q) d += std::norm(y(q, l) - images(q, c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        for (std::size_t i = 0; i < n; ++i) out[i][l] = (best >> (2 * i)) & 3;
    }
    return out;
}

/// Errors among the transmitted streams; a stream the detector did not produce counts as entirely wrong.
inline std::size_t count_symbol_errors(const std::vector<std::vector<std::size_t>>& sent,
                                       const std::vector<std::vector<std::size_t>>& detected) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < sent.size(); ++i) {
        for (std::size_t l = 0; l < sent[i].size(); ++l) {
            if (i >= detected.size() || detected[i][l] != sent[i][l]) ++errors;
        }
    }
    return errors;
}

struct SerPoint {
    double alpha = 0.0;
    double pf = 0.0;
    double pd = 0.0;
    double ser = 0.0;
};

struct SerReport {
    std::vector<SerPoint> operating_points;
    double ser_known_system = 0.0;
    double ser_known_channel = 0.0;
    std::size_t trials_per_class = 0;
    std::size_t symbols = 0;  // transmitted scalar symbols behind every SER
    std::string modulation = "qpsk";
};

inline constexpr std::size_t kDefaultDataLength = 96;

/**
 * Pilot GLRT decides the system; its LS channel then feeds exhaustive QPSK detection of data_len symbols.
 *
 * Data use amplitude data_amp / sqrt(n) per antenna. References: the true system with its LS channel,
 * and the true channel.
 */
inline SerReport run_ser(const TrialSpec& spec, std::size_t data_len, const std::vector<double>& alphas,
                         std::size_t workers = 1) {
    TrialSpec s = spec;
    s.layout = HypothesisLayout::Binary;
    s.n_true = 1;
    s.classifier = ClassifierKind::Glrt;
    s.delay_mode = DelayMode::Sync;
    s.validate();
    if (data_len < 1) throw Error(ErrorKind::InvalidArgument, "data_len must be >= 1");
    for (double a : alphas) gaussian_tail_inverse(a);
    std::size_t cands = 1;
    for (std::size_t i = 0; i < s.n_max; ++i) {
        cands *= 4;
        if (cands > kMaxConstellationCandidates) {
            throw Error(ErrorKind::ConstellationTooLarge, "4^" + std::to_string(s.n_max) + " candidates");
        }
    }
    const PilotPool pool = make_pool(s.pool, s.pilot_length);
    const ComplexMatrix r_s = pilot_matrix(pool, 1, s.signal.pilot_amp);
    const ComplexMatrix r_m = pilot_matrix(pool, s.n_max, s.signal.pilot_amp);
    const std::size_t t = s.trials;
    const double beta_d = s.signal.data_amp;

    struct Outcome {
        std::size_t symbols = 0;
        std::vector<int> decide_mimo;
        std::vector<std::size_t> errors;
        std::size_t errors_known_system = 0;
        std::size_t errors_known_channel = 0;
    };
    const auto outcomes = parallel_map<Outcome>(2 * t, workers, [&](std::size_t i) {
        RngStream rng(s.seed, i);
        const std::size_t n_true = i < t ? 1 : s.n_max;
        const auto obs = detail::draw_sync(pool, s.m, n_true, s.signal.pilot_amp, s.snr_db, rng);

        RngStream data_rng = rng.derive(detail::kDataTag);
        std::vector<std::vector<std::size_t>> sent(n_true, std::vector<std::size_t>(data_len));
        ComplexMatrix x(n_true, data_len);
        for (std::size_t a = 0; a < n_true; ++a)
            for (std::size_t l = 0; l < data_len; ++l) {
                sent[a][l] = data_rng.index(4);
                x(a, l) = qpsk_symbol(sent[a][l]);
            }
        const auto gain = [&](std::size_t n) { return beta_d / std::sqrt(static_cast<double>(n)); };
        const ComplexMatrix yd =
            gain(n_true) * (obs.h * x) + sample_complex_gaussian(s.m, data_len, obs.noise_var, data_rng);

        const GlrtDecision d = glrt_decide_sync(obs.y, r_m, r_s, 0.0);
        const ThresholdModel base = glrt_threshold(0.5, r_m, r_s, d.h_hat_s, obs.noise_var);
        const auto detect_s = count_symbol_errors(sent, detect_qpsk(yd, d.h_hat_s, gain(1)));
        const auto detect_m = count_symbol_errors(sent, detect_qpsk(yd, d.h_hat_m, gain(s.n_max)));

        Outcome o;
        o.symbols = n_true * data_len;
        for (double a : alphas) {
            const double tau_g = std::sqrt(base.sigma2_tilde) * gaussian_tail_inverse(a) + base.mu_tilde;
            const bool mimo = d.statistic >= tau_g;
            o.decide_mimo.push_back(mimo ? 1 : 0);
            o.errors.push_back(mimo ? detect_m : detect_s);
        }
        o.errors_known_system = n_true == 1 ? detect_s : detect_m;
        o.errors_known_channel = count_symbol_errors(sent, detect_qpsk(yd, obs.h, gain(n_true)));
        return o;
    });

    SerReport rep;
    rep.trials_per_class = t;
    std::size_t ks = 0;
    std::size_t kc = 0;
    for (const auto& o : outcomes) {
        rep.symbols += o.symbols;
        ks += o.errors_known_system;
        kc += o.errors_known_channel;
    }
    const double total = static_cast<double>(rep.symbols);
    rep.ser_known_system = static_cast<double>(ks) / total;
    rep.ser_known_channel = static_cast<double>(kc) / total;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        std::size_t fa = 0;
        std::size_t det = 0;
        std::size_t err = 0;
        for (std::size_t i = 0; i < 2 * t; ++i) {
            (i < t ? fa : det) += static_cast<std::size_t>(outcomes[i].decide_mimo[k]);
            err += outcomes[i].errors[k];
        }
        rep.operating_points.push_back({alphas[k], static_cast<double>(fa) / static_cast<double>(t),
                                        static_cast<double>(det) / static_cast<double>(t),
                                        static_cast<double>(err) / total});
    }
    return rep;
}

struct MulticlassRow {
    double snr_db = 0.0;
    double rate = 0.0;
    std::size_t trials = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true n - 1][chosen n - 1]
};

/// Truth drawn uniformly from 1..n_max per trial; every hypothesis 1..n_max is scored.
inline std::vector<MulticlassRow> run_multiclass(const TrialSpec& spec, const std::vector<double>& snr_grid,
                                                 std::size_t workers = 1) {
    TrialSpec s = spec;
    s.layout = HypothesisLayout::Full;
    s.n_true = 1;
    if (s.classifier == ClassifierKind::Glrt) s.classifier = ClassifierKind::Ml;
    s.validate();

    std::vector<MulticlassRow> rows;
    for (std::size_t p = 0; p < snr_grid.size(); ++p) {
        const auto picks = parallel_map<std::pair<std::size_t, std::size_t>>(s.trials, workers, [&](std::size_t i) {
            const std::uint64_t stream = detail::point_stream(p, i);
            const std::size_t truth = RngStream(s.seed, stream, detail::kTruthTag).index(s.n_max) + 1;
            const TrialRecord rec = detail::run_trial_at(s, truth, snr_grid[p], stream);
            return std::pair{truth, rec.chosen_antennas};
        });
        MulticlassRow row;
        row.snr_db = snr_grid[p];
        row.trials = s.trials;
        row.confusion.assign(s.n_max, std::vector<std::size_t>(s.n_max, 0));
        std::size_t hits = 0;
        for (const auto& [truth, chosen] : picks) {
            ++row.confusion[truth - 1][chosen - 1];
            hits += truth == chosen ? 1 : 0;
        }
        row.rate = static_cast<double>(hits) / static_cast<double>(s.trials);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace pilot_clf
