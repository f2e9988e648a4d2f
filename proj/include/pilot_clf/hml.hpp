#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pilot_clf/classify.hpp"
#include "pilot_clf/error.hpp"
#include "pilot_clf/numerics.hpp"
#include "pilot_clf/pilots.hpp"
#include "pilot_clf/waveform.hpp"

namespace pilot_clf {

enum class EmInit { Random, Supplied };

struct EmConfig {
    std::size_t max_iters = 50;
    double loglik_tol = 1e-6;  // relative change of the marginal log-likelihood
    std::size_t restarts = 3;
    EmInit init = EmInit::Random;
    std::vector<ComplexMatrix> initial_h;  // one per hypothesis when init == Supplied
    double initial_tau = 0.0;

    void validate() const {
        if (max_iters < 1) throw Error(ErrorKind::InvalidArgument, "max_iters must be >= 1");
        if (!(loglik_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "loglik_tol must be > 0");
        if (restarts < 1) throw Error(ErrorKind::InvalidArgument, "restarts must be >= 1");
    }
};

struct EmState {
    std::size_t iteration = 0;
    ComplexMatrix h_hat;
    double tau_hat = 0.0;
    std::vector<double> responsibilities;  // sums to 1
    double log_marginal = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline void require_noise(double noise_var) {
    if (!(noise_var > 0.0)) throw Error(ErrorKind::InvalidArgument, "the mixture likelihood needs sigma_w^2 > 0");
}

inline void check_shapes(const ComplexMatrix& y, const ComplexMatrix& h, const AssignmentEnumeration& asg) {
    if (asg.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty assignment list");
    const ComplexMatrix& x = asg.assignments.front();
    if (h.rows() != y.rows() || h.cols() != x.rows() || x.cols() != y.cols()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "Y " + y.shape() + ", H " + h.shape() + ", X " + x.shape() + " are inconsistent");
    }
}

}  // namespace detail

/// -(mL/2) log(2 pi sigma^2) - ||Y - mean||_F^2 / (2 sigma^2).
inline double gaussian_loglik(const ComplexMatrix& y, const ComplexMatrix& mean, double noise_var) {
    detail::require_noise(noise_var);
    const double entries = static_cast<double>(y.rows() * y.cols());
    return -0.5 * entries * std::log(2.0 * std::numbers::pi * noise_var) -
           frobenius_distance(y, mean) * frobenius_distance(y, mean) / (2.0 * noise_var);
}

/// Conditional log-density for every assignment X_k (pilot amplitude already inside X_k).
inline std::vector<double> conditional_logliks(const ComplexMatrix& y, const ComplexMatrix& h,
                                               const AssignmentEnumeration& asg, double noise_var) {
    detail::check_shapes(y, h, asg);
    std::vector<double> out;
    out.reserve(asg.size());
    for (const auto& x : asg.assignments) out.push_back(gaussian_loglik(y, h * x, noise_var));
    return out;
}

/// log sum_k exp(l_k) / K.
inline double marginal_loglik(const ComplexMatrix& y, const ComplexMatrix& h, const AssignmentEnumeration& asg,
                              double noise_var) {
    const auto ll = conditional_logliks(y, h, asg, noise_var);
    return log_sum_exp(ll) - std::log(static_cast<double>(ll.size()));
}

inline std::vector<double> em_responsibilities(const ComplexMatrix& y, const ComplexMatrix& h,
                                               const AssignmentEnumeration& asg, double noise_var) {
    auto ll = conditional_logliks(y, h, asg, noise_var);
    const double norm = log_sum_exp(ll);
    for (auto& v : ll) v = std::exp(v - norm);
    return ll;
}

namespace detail {

/// A = sum alpha_k X_k and B = sum alpha_k X_k X_k^H.
struct WeightedMoments {
    ComplexMatrix a;
    ComplexMatrix b_inv;
};

inline WeightedMoments weighted_moments(const AssignmentEnumeration& asg, const std::vector<double>& alpha) {
    const ComplexMatrix& x0 = asg.assignments.front();
    WeightedMoments wm;
    wm.a = ComplexMatrix(x0.rows(), x0.cols());
    ComplexMatrix b(x0.rows(), x0.rows());
    for (std::size_t k = 0; k < asg.size(); ++k) {
        if (alpha[k] == 0.0) continue;
        const ComplexMatrix& x = asg.assignments[k];
        wm.a += alpha[k] * x;
        b += alpha[k] * (x * x.adjoint());
    }
    try {
        wm.b_inv = hermitian_inverse(b);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotPositiveDefinite) {
            throw Error(ErrorKind::SingularWeightedGram, "sum alpha_k X_k X_k^H is singular");
        }
        throw;
    }
    return wm;
}

inline std::size_t bank_index(const FilterBank& bank, double tau) {
    if (bank.size() == 0) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < bank.size(); ++i)
        if (std::abs(bank.grid[i] - tau) < std::abs(bank.grid[best] - tau)) best = i;
    return best;
}

}  // namespace detail

/// Responsibilities at the current H, then H = Y A^H B^{-1}.
inline EmState em_step_sync(const ComplexMatrix& y, const EmState& state, const AssignmentEnumeration& asg,
                            double noise_var) {
    detail::check_shapes(y, state.h_hat, asg);
    const auto alpha = em_responsibilities(y, state.h_hat, asg, noise_var);
    const auto wm = detail::weighted_moments(asg, alpha);

    EmState next;
    next.iteration = state.iteration + 1;
    next.tau_hat = state.tau_hat;
    next.h_hat = y * wm.a.adjoint() * wm.b_inv;
    next.responsibilities = alpha;
    next.log_marginal = marginal_loglik(y, next.h_hat, asg, noise_var);
    return next;
}

/**
 * Responsibilities at (H, tau), then tau by grid search on the weighted surrogate, then H at the new tau.
 *
 * With H profiled out, the surrogate at tau is ||Y_tau||^2 - tr(C B^{-1} C^H), C = Y_tau A^H,
 * so one pass over the grid yields the joint maximiser.
 */
inline EmState em_step_async(const FilterBank& bank, const EmState& state, const AssignmentEnumeration& asg,
                             double noise_var) {
    const std::size_t cur = detail::bank_index(bank, state.tau_hat);
    const auto alpha = em_responsibilities(bank.outputs[cur], state.h_hat, asg, noise_var);
    const auto wm = detail::weighted_moments(asg, alpha);
    const ComplexMatrix a_h = wm.a.adjoint();

    std::size_t best = cur;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const ComplexMatrix& y = bank.outputs[i];
        const ComplexMatrix c = y * a_h;
        const double cost = y.frobenius_norm_sq() - real_inner(c, c * wm.b_inv);
        if (cost < best_cost) {
            best_cost = cost;
            best = i;
        }
    }

    EmState next;
    next.iteration = state.iteration + 1;
    next.tau_hat = bank.grid[best];
    next.h_hat = bank.outputs[best] * a_h * wm.b_inv;
    next.responsibilities = alpha;
    next.log_marginal = marginal_loglik(bank.outputs[best], next.h_hat, asg, noise_var);
    return next;
}

inline EmState em_step_async(const OversampledBurst& burst, const EmState& state, const AssignmentEnumeration& asg,
                             double noise_var, const std::vector<double>& grid) {
    return em_step_async(matched_filter_bank(burst, grid, asg.assignments.front().cols()), state, asg, noise_var);
}

struct EmRun {
    EmState state;
    bool converged = false;
    std::vector<double> history;  // log_marginal after initialisation and after each step
};

namespace detail {

template <typename Step, typename Eval>
EmRun em_iterate(EmState start, const EmConfig& cfg, Step step, Eval eval) {
    EmRun run;
    start.log_marginal = eval(start);
    run.history.push_back(start.log_marginal);
    run.state = std::move(start);
    for (std::size_t r = 0; r < cfg.max_iters; ++r) {
        EmState next = step(run.state);
        const double prev = run.state.log_marginal;
        run.history.push_back(next.log_marginal);
        run.state = std::move(next);
        if (std::abs(run.state.log_marginal - prev) <= cfg.loglik_tol * std::max(1.0, std::abs(prev))) {
            run.converged = true;
            break;
        }
    }
    return run;
}

}  // namespace detail

inline EmRun em_run_sync(const ComplexMatrix& y, const AssignmentEnumeration& asg, double noise_var, EmState start,
                         const EmConfig& cfg) {
    cfg.validate();
    return detail::em_iterate(
        std::move(start), cfg, [&](const EmState& s) { return em_step_sync(y, s, asg, noise_var); },
        [&](const EmState& s) { return marginal_loglik(y, s.h_hat, asg, noise_var); });
}

inline EmRun em_run_async(const FilterBank& bank, const AssignmentEnumeration& asg, double noise_var, EmState start,
                          const EmConfig& cfg) {
    cfg.validate();
    start.tau_hat = bank.grid[detail::bank_index(bank, start.tau_hat)];
    return detail::em_iterate(
        std::move(start), cfg, [&](const EmState& s) { return em_step_async(bank, s, asg, noise_var); },
        [&](const EmState& s) {
            return marginal_loglik(bank.outputs[detail::bank_index(bank, s.tau_hat)], s.h_hat, asg, noise_var);
        });
}

struct HmlDiagnostics {
    std::vector<bool> converged;  // per hypothesis, for the selected restart
    std::vector<std::size_t> iterations;
    bool non_convergence = false;  // some selected restart hit max_iters
};

struct HmlResult {
    ClassificationResult classification;
    HmlDiagnostics diagnostics;
};

/// Assignment list for hypothesis j: the known pilots alone, or every ordered pick from the pool.
inline AssignmentEnumeration hypothesis_assignments(const HypothesisSet& hyp, std::size_t j,
                                                    std::size_t cap = kDefaultEnumerationCap) {
    if (hyp.knowledge == Knowledge::Exact) return single_assignment(hyp.pilots[j]);
    return enumerate_assignments(hyp.pool, hyp.antennas[j], hyp.pilot_amp, cap);
}

namespace detail {

template <typename RunOne>
HmlResult hml_classify_impl(const HypothesisSet& hyp, const EmConfig& cfg, std::size_t m, RngStream& rng,
                            const std::vector<double>& tau_range, RunOne run_one) {
    cfg.validate();
    if (hyp.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty hypothesis set");
    if (cfg.init == EmInit::Supplied && cfg.initial_h.size() != hyp.size()) {
        throw Error(ErrorKind::InvalidArgument, "supplied initialisation needs one H per hypothesis");
    }
    // Enumerations first so an over-cap hypothesis fails before any EM work.
    std::vector<AssignmentEnumeration> enums;
    for (std::size_t j = 0; j < hyp.size(); ++j) enums.push_back(hypothesis_assignments(hyp, j));

    HmlResult out;
    auto& res = out.classification;
    for (std::size_t j = 0; j < hyp.size(); ++j) {
        std::optional<EmRun> best;
        const std::size_t runs = cfg.init == EmInit::Supplied ? 1 : cfg.restarts;
        for (std::size_t r = 0; r < runs; ++r) {
            EmState start;
            if (cfg.init == EmInit::Supplied) {
                start.h_hat = cfg.initial_h[j];
                start.tau_hat = cfg.initial_tau;
            } else {
                RngStream child = rng.derive(j * 1024 + r);
                start.h_hat = sample_complex_gaussian(m, hyp.antennas[j], 1.0, child);
                start.tau_hat = child.uniform(tau_range.front(), tau_range.back());
            }
            EmRun run = run_one(enums[j], std::move(start));
            if (!best || run.state.log_marginal > best->state.log_marginal) best = std::move(run);
        }
        res.scores.push_back(best->state.log_marginal);
        res.h_hat.push_back(best->state.h_hat);
        res.tau_hat.emplace_back(best->state.tau_hat);
        out.diagnostics.converged.push_back(best->converged);
        out.diagnostics.iterations.push_back(best->state.iteration);
        out.diagnostics.non_convergence = out.diagnostics.non_convergence || !best->converged;
    }
    res.chosen = argmax_prefer_first(res.scores);
    res.chosen_antennas = hyp.antennas[res.chosen];
    return out;
}

}  // namespace detail

inline HmlResult hml_classify_sync(const ComplexMatrix& y, const HypothesisSet& hyp, const EmConfig& cfg,
                                   double noise_var, RngStream& rng) {
    detail::require_noise(noise_var);
    HmlResult out = detail::hml_classify_impl(hyp, cfg, y.rows(), rng, {0.0}, [&](const auto& asg, EmState start) {
        return em_run_sync(y, asg, noise_var, std::move(start), cfg);
    });
    for (auto& t : out.classification.tau_hat) t.reset();
    return out;
}

inline HmlResult hml_classify_async(const FilterBank& bank, const HypothesisSet& hyp, const EmConfig& cfg,
                                    RngStream& rng) {
    detail::require_noise(bank.noise_var);
    if (bank.size() == 0) throw Error(ErrorKind::EmptyGrid, "delay grid is empty");
    return detail::hml_classify_impl(
        hyp, cfg, bank.outputs.front().rows(), rng, {bank.grid.front(), bank.grid.back()},
        [&](const auto& asg, EmState start) { return em_run_async(bank, asg, bank.noise_var, std::move(start), cfg); });
}

inline HmlResult hml_classify_async(const OversampledBurst& burst, const HypothesisSet& hyp, const EmConfig& cfg,
                                    const std::vector<double>& grid, RngStream& rng) {
    if (hyp.size() == 0) throw Error(ErrorKind::InvalidArgument, "empty hypothesis set");
    return hml_classify_async(matched_filter_bank(burst, grid, hyp.pilots.front().cols()), hyp, cfg, rng);
}

}  // namespace pilot_clf
