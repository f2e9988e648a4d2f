#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pilot_clf/error.hpp"
#include "pilot_clf/numerics.hpp"
#include "pilot_clf/pilots.hpp"
#include "pilot_clf/waveform.hpp"

namespace pilot_clf {

/// Relative tolerance under which two hypothesis scores count as tied.
inline constexpr double kTieTolerance = 1e-9;

struct ClassificationResult {
    std::size_t chosen = 0;           // index into the hypothesis list
    std::size_t chosen_antennas = 0;  // antenna count of that hypothesis
    std::vector<double> scores;
    std::vector<std::optional<double>> tau_hat;  // empty optionals in synchronous mode
    std::vector<ComplexMatrix> h_hat;            // empty matrices where no channel is estimated
};

/// Index of the largest score; anything within tol * |max| of it counts as a tie and the earliest wins.
inline std::size_t argmax_prefer_first(std::span<const double> scores, double tol = kTieTolerance) {
    if (scores.empty()) throw Error(ErrorKind::InvalidArgument, "no scores to compare");
    double best = scores[0];
    for (double s : scores) best = std::max(best, s);
    const double floor = best - tol * std::abs(best);
    for (std::size_t j = 0; j < scores.size(); ++j)
        if (scores[j] >= floor) return j;
    return 0;
}

/**
 * Cached pieces of one pilot matrix: R^H and (R R^H)^{-1}.
 *
 * Projected energy tr(P Y^H Y) is evaluated as tr(C G^{-1} C^H) with
 * C = Y R^H, which never forms the L x L projector.
 */
class PilotProjector {
public:
    explicit PilotProjector(const ComplexMatrix& r) : r_(r), rh_(r.adjoint()) {
        if (r.rows() == 0 || r.rows() > r.cols()) {
            throw Error(ErrorKind::RankDeficient, "pilot matrix " + r.shape() + " cannot have full row rank");
        }
        try {
            gram_inv_ = hermitian_inverse(r * rh_);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::NotPositiveDefinite) throw Error(ErrorKind::RankDeficient, "R R^H is singular");
            throw;
        }
    }

    const ComplexMatrix& pilots() const { return r_; }

    ComplexMatrix channel(const ComplexMatrix& y) const {
        check(y);
        return y * rh_ * gram_inv_;
    }

    double projected_energy(const ComplexMatrix& y) const {
        check(y);
        const ComplexMatrix c = y * rh_;
        return real_inner(c, c * gram_inv_);
    }

private:
    void check(const ComplexMatrix& y) const {
        if (y.cols() != r_.cols()) {
            throw Error(ErrorKind::DimensionMismatch, "observation " + y.shape() + " vs pilots " + r_.shape());
        }
    }

    ComplexMatrix r_;
    ComplexMatrix rh_;
    ComplexMatrix gram_inv_;
};

/// Least-squares channel Y R^H (R R^H)^{-1}.
inline ComplexMatrix ls_channel(const ComplexMatrix& y, const ComplexMatrix& r) { return PilotProjector(r).channel(y); }

/// tr(P_j Y^H Y); maximising it is the synchronous ML rule.
inline double ml_score_sync(const ComplexMatrix& y, const ComplexMatrix& r) {
    return PilotProjector(r).projected_energy(y);
}

inline ClassificationResult ml_classify_sync(const ComplexMatrix& y, const HypothesisSet& hyp) {
    ClassificationResult out;
    for (const auto& r : hyp.pilots) {
        PilotProjector proj(r);
        out.scores.push_back(proj.projected_energy(y));
        out.h_hat.push_back(proj.channel(y));
        out.tau_hat.emplace_back();
    }
    out.chosen = argmax_prefer_first(out.scores);
    out.chosen_antennas = hyp.antennas[out.chosen];
    return out;
}

/// Which function of tau the delay search maximises.
enum class DelayObjective {
    Concentrated,     // -tr(P^perp Y_tau^H Y_tau), the likelihood with H profiled out
    ProjectedEnergy,  // tr(P Y_tau^H Y_tau) alone
};

struct DelayEstimate {
    double tau = 0.0;
    std::size_t grid_index = 0;
    ComplexMatrix h_hat;
    double score = 0.0;      // ML statistic at tau_hat
    double objective = 0.0;  // maximised objective value
};

/// {tr(R^H H^H Y) - tr(R^H H^H H R) / 2} / sigma_w^2; sigma_w^2 = 0 leaves the bracket unscaled.
inline double ml_statistic(const ComplexMatrix& y, const ComplexMatrix& r, const ComplexMatrix& h, double noise_var) {
    const ComplexMatrix fit = h * r;
    const double value = real_inner(fit, y) - 0.5 * fit.frobenius_norm_sq();
    return noise_var > 0.0 ? value / noise_var : value;
}

inline DelayEstimate delay_search_ml(const FilterBank& bank, const ComplexMatrix& r,
                                     DelayObjective objective = DelayObjective::Concentrated) {
    if (bank.size() == 0) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    PilotProjector proj(r);
    DelayEstimate best;
    bool have = false;
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const ComplexMatrix& y = bank.outputs[i];
        double value = proj.projected_energy(y);
        if (objective == DelayObjective::Concentrated) value -= y.frobenius_norm_sq();
        if (!have || value > best.objective) {
            best.objective = value;
            best.grid_index = i;
            have = true;
        }
    }
    best.tau = bank.grid[best.grid_index];
    const ComplexMatrix& y = bank.outputs[best.grid_index];
    best.h_hat = proj.channel(y);
    best.score = ml_statistic(y, r, best.h_hat, bank.noise_var);
    return best;
}

inline DelayEstimate delay_search_ml(const OversampledBurst& burst, const ComplexMatrix& r, const std::vector<double>& grid,
                                     DelayObjective objective = DelayObjective::Concentrated) {
    return delay_search_ml(matched_filter_bank(burst, grid, r.cols()), r, objective);
}

inline ClassificationResult ml_classify_async(const FilterBank& bank, const HypothesisSet& hyp,
                                              DelayObjective objective = DelayObjective::Concentrated) {
    ClassificationResult out;
    for (const auto& r : hyp.pilots) {
        DelayEstimate est = delay_search_ml(bank, r, objective);
        out.scores.push_back(est.score);
        out.tau_hat.emplace_back(est.tau);
        out.h_hat.push_back(std::move(est.h_hat));
    }
    out.chosen = argmax_prefer_first(out.scores);
    out.chosen_antennas = hyp.antennas[out.chosen];
    return out;
}

inline ClassificationResult ml_classify_async(const OversampledBurst& burst, const HypothesisSet& hyp,
                                              const std::vector<double>& grid,
                                              DelayObjective objective = DelayObjective::Concentrated) {
    if (hyp.pilots.empty()) throw Error(ErrorKind::InvalidArgument, "empty hypothesis set");
    return ml_classify_async(matched_filter_bank(burst, grid, hyp.pilots.front().cols()), hyp, objective);
}

/// Lambda = tr((P_M - P_S) Y^H Y), evaluated through the explicit L x L projector difference.
inline double glrt_sync(const ComplexMatrix& y, const ComplexMatrix& r_m, const ComplexMatrix& r_s) {
    if (y.cols() != r_m.cols() || y.cols() != r_s.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "observation and pilot lengths differ");
    }
    const ComplexMatrix diff = projection(r_m) - projection(r_s);
    return real_inner(y, y * diff);
}

struct GlrtAsync {
    double statistic = 0.0;
    DelayEstimate mimo;
    DelayEstimate simo;
};

inline GlrtAsync glrt_async_detail(const FilterBank& bank, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                                   DelayObjective objective = DelayObjective::Concentrated) {
    GlrtAsync out;
    out.mimo = delay_search_ml(bank, r_m, objective);
    out.simo = delay_search_ml(bank, r_s, objective);
    out.statistic = out.mimo.score - out.simo.score;
    return out;
}

inline double glrt_async(const FilterBank& bank, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                         DelayObjective objective = DelayObjective::Concentrated) {
    return glrt_async_detail(bank, r_m, r_s, objective).statistic;
}

inline double glrt_async(const OversampledBurst& burst, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                         const std::vector<double>& grid, DelayObjective objective = DelayObjective::Concentrated) {
    return glrt_async(matched_filter_bank(burst, grid, r_m.cols()), r_m, r_s, objective);
}

/// Gaussian approximation of Lambda under the SIMO hypothesis and the threshold it implies.
struct ThresholdModel {
    double mu_tilde = 0.0;
    double sigma2_tilde = 0.0;
    double tau_g = 0.0;
    double alpha = 0.0;
};

/**
 * Threshold for a false-alarm rate alpha: tau_g = sigma~ Q^{-1}(alpha) + mu~.
 *
 * With rows y_l ~ CN(h_l r_S, sigma^2 I) and Z1, Z2 the quadratic forms in
 * P_M and P_S:
 *   mu~     = (r_S (P_M - P_S) r_S^H) sum|h|^2 + m sigma^2 tr(P_M - P_S)
 *   var Zi  = 2 sigma^2 (r_S P_i r_S^H) sum|h|^2 + m sigma^4 tr(P_i)
 *   cov     = 2 sigma^2 Re(r_S P_M P_S r_S^H) sum|h|^2 + m sigma^4 tr(P_M P_S)
 *   sigma~2 = var Z1 + var Z2 - 2 cov
 */
inline ThresholdModel glrt_threshold(double alpha, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                                     const ComplexMatrix& h_s, double noise_var) {
    const double q_inv = gaussian_tail_inverse(alpha);
    if (r_s.rows() != 1) throw Error(ErrorKind::DimensionMismatch, "SIMO pilots must be a single row");
    if (h_s.cols() != 1) throw Error(ErrorKind::DimensionMismatch, "SIMO channel must be m x 1");
    if (r_m.cols() != r_s.cols()) throw Error(ErrorKind::DimensionMismatch, "pilot lengths differ");

    const ComplexMatrix p_m = projection(r_m);
    const ComplexMatrix p_s = projection(r_s);
    const ComplexMatrix p_ms = p_m * p_s;
    const double m = static_cast<double>(h_s.rows());
    const double energy = h_s.frobenius_norm_sq();
    const double s2 = noise_var;
    const double s4 = noise_var * noise_var;

    const auto quad = [&](const ComplexMatrix& a) { return real_inner(r_s.adjoint(), a * r_s.adjoint()); };
    const double q_m = quad(p_m);
    const double q_s = quad(p_s);
    const double q_ms = quad(p_ms);
    const double tr_m = p_m.trace().real();
    const double tr_s = p_s.trace().real();
    const double tr_ms = p_ms.trace().real();

    ThresholdModel model;
    model.alpha = alpha;
    model.mu_tilde = (q_m - q_s) * energy + m * s2 * (tr_m - tr_s);
    double var = 2.0 * s2 * (q_m + q_s - 2.0 * q_ms) * energy + m * s4 * (tr_m + tr_s - 2.0 * tr_ms);
    const double scale = 2.0 * s2 * (q_m + q_s) * energy + m * s4 * (tr_m + tr_s);
    if (var < -1e-9 * std::max(scale, 1e-300)) {
        throw Error(ErrorKind::NegativeVariance, "sigma~^2 = " + std::to_string(var));
    }
    var = std::max(var, 0.0);
    model.sigma2_tilde = var;
    model.tau_g = std::sqrt(var) * q_inv + model.mu_tilde;
    return model;
}

struct GlrtDecision {
    double statistic = 0.0;
    double threshold = 0.0;
    bool decide_mimo = false;
    ComplexMatrix h_hat_s;
    ComplexMatrix h_hat_m;
};

/// Synchronous GLRT at a fixed threshold; Lambda >= threshold decides MIMO.
inline GlrtDecision glrt_decide_sync(const ComplexMatrix& y, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                                     double threshold) {
    GlrtDecision d;
    d.statistic = glrt_sync(y, r_m, r_s);
    d.threshold = threshold;
    d.decide_mimo = d.statistic >= threshold;
    d.h_hat_s = ls_channel(y, r_s);
    d.h_hat_m = ls_channel(y, r_m);
    return d;
}

/// Synchronous GLRT with the threshold designed from the LS SIMO channel estimate of the same observation.
inline GlrtDecision glrt_detect_sync(const ComplexMatrix& y, const ComplexMatrix& r_m, const ComplexMatrix& r_s,
                                     double alpha, double noise_var) {
    GlrtDecision d = glrt_decide_sync(y, r_m, r_s, 0.0);
    d.threshold = glrt_threshold(alpha, r_m, r_s, d.h_hat_s, noise_var).tau_g;
    d.decide_mimo = d.statistic >= d.threshold;
    return d;
}

/// argmax over the grid of ||Y_tau R^H||_F^2, first maximiser on ties.
inline std::size_t corr_delay_index(const FilterBank& bank, const ComplexMatrix& r) {
    if (bank.size() == 0) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    const ComplexMatrix rh = r.adjoint();
    std::size_t best = 0;
    double best_value = -1.0;
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const double v = (bank.outputs[i] * rh).frobenius_norm_sq();
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

inline double corr_delay(const FilterBank& bank, const ComplexMatrix& r) { return bank.grid[corr_delay_index(bank, r)]; }

inline double corr_delay(const OversampledBurst& burst, const ComplexMatrix& r, const std::vector<double>& grid) {
    return corr_delay(matched_filter_bank(burst, grid, r.cols()), r);
}

/// tr(Y R^H R Y^H) = ||Y R^H||_F^2.
inline double corr_score(const ComplexMatrix& y, const ComplexMatrix& r) { return (y * r.adjoint()).frobenius_norm_sq(); }

enum class CorrMode { AsyncEstimated, AsyncIgnored, Sync };

inline ClassificationResult corr_classify(const ComplexMatrix& y, const HypothesisSet& hyp) {
    ClassificationResult out;
    for (const auto& r : hyp.pilots) {
        out.scores.push_back(corr_score(y, r));
        out.tau_hat.emplace_back();
        out.h_hat.emplace_back();
    }
    out.chosen = argmax_prefer_first(out.scores);
    out.chosen_antennas = hyp.antennas[out.chosen];
    return out;
}

/// Asynchronous correlation classifier; AsyncIgnored reads the tau = 0 output, which the bank must contain.
inline ClassificationResult corr_classify(const FilterBank& bank, const HypothesisSet& hyp, CorrMode mode) {
    if (mode == CorrMode::Sync) throw Error(ErrorKind::InvalidArgument, "synchronous mode takes a matrix");
    if (bank.size() == 0) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    std::size_t zero = bank.size();
    for (std::size_t i = 0; i < bank.size(); ++i)
        if (std::abs(bank.grid[i]) < 1e-12) zero = i;
    if (mode == CorrMode::AsyncIgnored && zero == bank.size()) {
        throw Error(ErrorKind::DelayOutOfRange, "grid has no tau = 0 entry");
    }
    ClassificationResult out;
    for (const auto& r : hyp.pilots) {
        const std::size_t idx = mode == CorrMode::AsyncIgnored ? zero : corr_delay_index(bank, r);
        out.scores.push_back(corr_score(bank.outputs[idx], r));
        out.tau_hat.emplace_back(bank.grid[idx]);
        out.h_hat.emplace_back();
    }
    out.chosen = argmax_prefer_first(out.scores);
    out.chosen_antennas = hyp.antennas[out.chosen];
    return out;
}

inline ClassificationResult corr_classify(const OversampledBurst& burst, const HypothesisSet& hyp, CorrMode mode,
                                          const std::vector<double>& grid) {
    if (hyp.pilots.empty()) throw Error(ErrorKind::InvalidArgument, "empty hypothesis set");
    const std::size_t len = hyp.pilots.front().cols();
    if (mode == CorrMode::AsyncIgnored) return corr_classify(matched_filter_bank(burst, {0.0}, len), hyp, mode);
    return corr_classify(matched_filter_bank(burst, grid, len), hyp, mode);
}

}  // namespace pilot_clf
