#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "pilot_clf/error.hpp"
#include "pilot_clf/numerics.hpp"

namespace pilot_clf {

/// Physical-layer parameters of the pilot burst.
struct SignalConfig {
    double symbol_period = 1.0;     // Ts, seconds
    double rolloff = 0.3;           // epsilon
    std::size_t pulse_span = 6;     // symbols; pulse truncated to +-span/2 * Ts
    std::size_t oversampling = 16;  // samples per symbol
    double pilot_amp = 1.0;
    double data_amp = 1.0;
    double noise_var = 0.0;  // per matched-filter output sample
    double delay_max = 0.5;  // seconds

    double sample_period() const { return symbol_period / static_cast<double>(oversampling); }
    double half_span() const { return 0.5 * static_cast<double>(pulse_span) * symbol_period; }

    void validate() const {
        if (!(symbol_period > 0.0)) throw Error(ErrorKind::InvalidArgument, "symbol_period must be > 0");
        if (!(rolloff > 0.0 && rolloff <= 1.0)) throw Error(ErrorKind::InvalidArgument, "rolloff must be in (0,1]");
        if (pulse_span < 2) throw Error(ErrorKind::InvalidArgument, "pulse_span must be >= 2");
        if (oversampling < 4) throw Error(ErrorKind::InvalidArgument, "oversampling must be >= 4");
        if (!(noise_var >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise_var must be >= 0");
        if (!(delay_max >= 0.0 && delay_max < symbol_period)) {
            throw Error(ErrorKind::InvalidArgument, "delay_max must be in [0, Ts)");
        }
    }

    friend bool operator==(const SignalConfig&, const SignalConfig&) = default;
};

namespace detail {

inline double rrc_formula(double x, double rolloff, double symbol_period) {
    const double e4x = 4.0 * rolloff * x;
    const double num = std::cos((1.0 + rolloff) * std::numbers::pi * x) + std::sin((1.0 - rolloff) * std::numbers::pi * x) / e4x;
    return 4.0 * rolloff / (std::numbers::pi * std::sqrt(symbol_period)) * num / (1.0 - e4x * e4x);
}

}  // namespace detail

/// Truncated square-root raised-cosine pulse g(t), unit energy before truncation.
inline double rrc_pulse(double t, const SignalConfig& cfg) {
    if (std::abs(t) > cfg.half_span() * (1.0 + 1e-12)) return 0.0;
    const double x = t / cfg.symbol_period;
    const double eps = cfg.rolloff;
    if (std::abs(x) < 1e-12) {
        return (4.0 * eps / std::numbers::pi + 1.0 - eps) / std::sqrt(cfg.symbol_period);
    }
    const double singular = 1.0 / (4.0 * eps);
    if (std::abs(std::abs(x) - singular) < 1e-9) {
        constexpr double h = 1e-8;
        return 0.5 * (detail::rrc_formula(x + h, eps, cfg.symbol_period) + detail::rrc_formula(x - h, eps, cfg.symbol_period));
    }
    return detail::rrc_formula(x, eps, cfg.symbol_period);
}

/// Riemann sum of g(t) g(t - delta) at resolution Ts / (8 O), on a grid centred at delta / 2.
inline double pulse_autocorrelation(double delta, const SignalConfig& cfg) {
    const double h = cfg.sample_period() / 8.0;
    const double half = cfg.half_span() - 0.5 * std::abs(delta);
    if (half < 0.0) return 0.0;
    const auto kmax = static_cast<long>(std::ceil(half / h)) + 1;
    double s = 0.0;
    for (long k = -kmax; k <= kmax; ++k) {
        const double u = static_cast<double>(k) * h;
        s += rrc_pulse(0.5 * delta + u, cfg) * rrc_pulse(u - 0.5 * delta, cfg);
    }
    return s * h;
}

/// Oversampled multi-antenna receive record. Sample s sits at time start_time + s * sample_period.
struct OversampledBurst {
    ComplexMatrix samples;  // m x (L*O + guard)
    double sample_period = 0.0;
    double start_time = 0.0;
    double true_delay = 0.0;
    std::size_t symbol_count = 0;
    SignalConfig config;

    std::size_t antennas() const { return samples.rows(); }
    /// Sample index of t = 0.
    std::size_t origin() const { return static_cast<std::size_t>(std::llround(-start_time / sample_period)); }
};

/// Grid of candidate delays k * Ts / O covering [0, delay_max].
inline std::vector<double> delay_grid(const SignalConfig& cfg) {
    const double dt = cfg.sample_period();
    std::vector<double> grid;
    for (std::size_t k = 0; static_cast<double>(k) * dt <= cfg.delay_max * (1.0 + 1e-12) + 1e-15; ++k) {
        grid.push_back(static_cast<double>(k) * dt);
    }
    return grid;
}

/// Snaps a delay to the nearest grid point within [0, delay_max].
inline double snap_to_grid(double tau, const SignalConfig& cfg) {
    const double dt = cfg.sample_period();
    const double kmax = std::floor(cfg.delay_max / dt + 1e-9);
    const double k = std::clamp(std::round(tau / dt), 0.0, kmax);
    return k * dt;
}

/**
 * Oversampled y_q(t) = sum_i h_qi amp sum_l x_i[l] g(t - l Ts - tau) + w_q(t).
 *
 * Noise is white with per-sample variance noise_var * O / Ts, which puts
 * noise_var on every matched-filter output.
 */
inline OversampledBurst synthesize_burst(const ComplexMatrix& h, const ComplexMatrix& x, double amp, double tau,
                                         const SignalConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (h.cols() != x.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "channel " + h.shape() + " vs symbols " + x.shape());
    }
    if (!(tau >= 0.0 && tau <= cfg.delay_max * (1.0 + 1e-12) + 1e-15)) {
        throw Error(ErrorKind::DelayOutOfRange, "tau " + std::to_string(tau) + " outside [0, delay_max]");
    }
    const std::size_t m = h.rows();
    const std::size_t len = x.cols();
    const std::size_t o = cfg.oversampling;
    const double dt = cfg.sample_period();
    const auto span_samples = cfg.pulse_span * o;
    const auto delay_samples = static_cast<std::size_t>(std::ceil(cfg.delay_max / dt - 1e-9));
    const auto lead = static_cast<std::size_t>(std::ceil(cfg.half_span() / dt - 1e-9));

    OversampledBurst burst;
    burst.samples = ComplexMatrix(m, len * o + span_samples + delay_samples);
    burst.sample_period = dt;
    burst.start_time = -static_cast<double>(lead) * dt;
    burst.true_delay = tau;
    burst.symbol_count = len;
    burst.config = cfg;

    const ComplexMatrix hx = h * x;  // m x L symbol-rate mixture
    const std::size_t total = burst.samples.cols();
    std::vector<double> pulse;
    for (std::size_t l = 0; l < len; ++l) {
        const double centre = static_cast<double>(l) * cfg.symbol_period + tau;
        const double lo = (centre - cfg.half_span() - burst.start_time) / dt;
        const double hi = (centre + cfg.half_span() - burst.start_time) / dt;
        const auto s0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo - 1e-9)));
        const auto s1 = std::min(total - 1, static_cast<std::size_t>(std::floor(hi + 1e-9)));
        pulse.assign(s1 + 1 - s0, 0.0);
        for (std::size_t s = s0; s <= s1; ++s) {
            pulse[s - s0] = rrc_pulse(burst.start_time + static_cast<double>(s) * dt - centre, cfg);
        }
        for (std::size_t q = 0; q < m; ++q) {
            const cplx a = amp * hx(q, l);
            if (a == cplx{}) continue;
            auto row = burst.samples.row(q);
            for (std::size_t s = s0; s <= s1; ++s) row[s] += a * pulse[s - s0];
        }
    }

    if (cfg.noise_var > 0.0) {
        const double per_sample = cfg.noise_var * static_cast<double>(o) / cfg.symbol_period;
        for (auto& v : burst.samples.data()) v += rng.complex_normal(per_sample);
    }
    return burst;
}

namespace detail {

inline long grid_index(const OversampledBurst& burst, double tau) {
    const double k = tau / burst.sample_period;
    const double kr = std::round(k);
    if (std::abs(k - kr) > 1e-6) {
        throw Error(ErrorKind::DelayOffGrid, "tau " + std::to_string(tau) + " is not a multiple of Ts/O");
    }
    if (tau < -1e-12 || tau > burst.config.delay_max * (1.0 + 1e-12) + 1e-12) {
        throw Error(ErrorKind::DelayOutOfRange, "tau " + std::to_string(tau) + " outside [0, delay_max]");
    }
    return static_cast<long>(kr);
}

inline std::vector<double> pulse_taps(const SignalConfig& cfg, long& half_width) {
    const double dt = cfg.sample_period();
    half_width = static_cast<long>(std::floor(cfg.half_span() / dt + 1e-9));
    std::vector<double> taps(static_cast<std::size_t>(2 * half_width + 1));
    for (long j = -half_width; j <= half_width; ++j) {
        taps[static_cast<std::size_t>(j + half_width)] = rrc_pulse(static_cast<double>(j) * dt, cfg);
    }
    return taps;
}

inline ComplexMatrix matched_filter_with_taps(const OversampledBurst& burst, long tau_index, std::size_t len,
                                              const std::vector<double>& taps, long half_width) {
    const std::size_t m = burst.antennas();
    const auto o = static_cast<long>(burst.config.oversampling);
    const auto origin = static_cast<long>(burst.origin());
    const auto total = static_cast<long>(burst.samples.cols());
    ComplexMatrix out(m, len);
    for (std::size_t q = 0; q < m; ++q) {
        auto row = burst.samples.row(q);
        for (std::size_t k = 0; k < len; ++k) {
            const long centre = origin + static_cast<long>(k) * o + tau_index;
            cplx acc = 0.0;
            for (long j = -half_width; j <= half_width; ++j) {
                const long s = centre + j;
                if (s < 0 || s >= total) continue;
                acc += row[static_cast<std::size_t>(s)] * taps[static_cast<std::size_t>(j + half_width)];
            }
            out(q, k) = acc * burst.sample_period;
        }
    }
    return out;
}

}  // namespace detail

/// (Y_tau)_{qk} = sum_s y_q(t_s) g(t_s - k Ts - tau) dt for k = 0..len-1; tau must lie on the sample grid.
inline ComplexMatrix matched_filter(const OversampledBurst& burst, double tau, std::size_t len) {
    if (len > burst.symbol_count) {
        throw Error(ErrorKind::DimensionMismatch, "burst holds fewer symbols than requested");
    }
    const long k = detail::grid_index(burst, tau);
    long half = 0;
    const auto taps = detail::pulse_taps(burst.config, half);
    return detail::matched_filter_with_taps(burst, k, len, taps, half);
}

/// Matched-filter outputs for every delay of a grid, computed once and shared by the delay searches.
struct FilterBank {
    std::vector<double> grid;
    std::vector<ComplexMatrix> outputs;
    double noise_var = 0.0;

    std::size_t size() const { return grid.size(); }
};

inline FilterBank matched_filter_bank(const OversampledBurst& burst, const std::vector<double>& grid, std::size_t len) {
    if (grid.empty()) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    if (len > burst.symbol_count) {
        throw Error(ErrorKind::DimensionMismatch, "burst holds fewer symbols than requested");
    }
    long half = 0;
    const auto taps = detail::pulse_taps(burst.config, half);
    FilterBank bank;
    bank.grid = grid;
    bank.noise_var = burst.config.noise_var;
    bank.outputs.reserve(grid.size());
    for (double tau : grid) {
        bank.outputs.push_back(detail::matched_filter_with_taps(burst, detail::grid_index(burst, tau), len, taps, half));
    }
    return bank;
}

/// sigma_w^2 that makes 10 log10(||HR||^2 / (m L sigma_w^2)) equal snr_db; +inf maps to 0.
inline double calibrate_noise_for_snr(const ComplexMatrix& h, const ComplexMatrix& r, double snr_db) {
    const double signal = (h * r).frobenius_norm_sq();
    if (!(signal > 0.0)) throw Error(ErrorKind::ZeroSignal, "||HR||_F is zero");
    if (std::isinf(snr_db) && snr_db > 0.0) return 0.0;
    const double entries = static_cast<double>(h.rows() * r.cols());
    return signal / (entries * std::pow(10.0, snr_db / 10.0));
}

inline double realized_snr_db(const ComplexMatrix& h, const ComplexMatrix& r, double noise_var) {
    const double signal = (h * r).frobenius_norm_sq();
    if (noise_var == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal / (static_cast<double>(h.rows() * r.cols()) * noise_var));
}

}  // namespace pilot_clf
