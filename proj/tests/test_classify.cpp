#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "pilot_clf/classify.hpp"

using namespace pilot_clf;

namespace {

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

ComplexMatrix noiseless(const ComplexMatrix& h, const ComplexMatrix& r) { return h * r; }

}  // namespace

TEST(TieRule, EarliestWithinRelativeTolerance) {
    EXPECT_EQ(argmax_prefer_first(std::vector<double>{1.0, 3.0, 3.0}), 1u);
    EXPECT_EQ(argmax_prefer_first(std::vector<double>{1.0, 3.0, 3.0 + 1e-12}), 1u);
    EXPECT_EQ(argmax_prefer_first(std::vector<double>{1.0, 3.0, 3.1}), 2u);
    EXPECT_EQ(argmax_prefer_first(std::vector<double>{-5.0, -2.0, -2.0}), 1u);
}

TEST(LsChannel, NoiselessRecoveryAndRankCheck) {
    RngStream rng(1, 0);
    const auto pool = hadamard_pool(8);
    for (std::size_t n = 1; n <= 4; ++n) {
        const ComplexMatrix r = pilot_matrix(pool, n, 1.3);
        const ComplexMatrix h = sample_complex_gaussian(4, n, 1.0, rng);
        EXPECT_LT(max_abs_diff(ls_channel(noiseless(h, r), r), h), 1e-12);
    }
    ComplexMatrix bad(2, 8);
    for (std::size_t l = 0; l < 8; ++l) bad(0, l) = bad(1, l) = 1.0;
    try {
        ls_channel(ComplexMatrix(4, 8), bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
    }
    try {
        ls_channel(ComplexMatrix(4, 7), pilot_matrix(pool, 2, 1.0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(MlSync, NoiselessPicksTruthForEveryAntennaCount) {
    const auto pool = hadamard_pool(8);
    const auto hyp = build_hypotheses(pool, 4, 1.0);
    RngStream rng(2, 0);
    for (int rep = 0; rep < 20; ++rep)
        for (std::size_t n = 1; n <= 4; ++n) {
            const ComplexMatrix h = sample_complex_gaussian(4, n, 1.0, rng);
            const auto res = ml_classify_sync(noiseless(h, hyp.pilots[n - 1]), hyp);
            EXPECT_EQ(res.chosen_antennas, n);
            EXPECT_LT(max_abs_diff(res.h_hat[n - 1], h), 1e-10);
        }
}

TEST(MlSync, ScoreIsProjectedEnergy) {
    RngStream rng(3, 0);
    const ComplexMatrix y = sample_complex_gaussian(4, 8, 1.0, rng);
    const ComplexMatrix r = sample_complex_gaussian(3, 8, 1.0, rng);
    const double direct = real_inner(y, y * projection(r));
    EXPECT_NEAR(ml_score_sync(y, r), direct, 1e-10 * direct);
}

TEST(Glrt, EqualsMlScoreDifference) {
    RngStream rng(4, 0);
    const auto pool = hadamard_pool(8);
    for (int rep = 0; rep < 10; ++rep) {
        const ComplexMatrix y = sample_complex_gaussian(4, 8, 1.0, rng);
        const ComplexMatrix r_s = pilot_matrix(pool, 1, 1.0);
        const ComplexMatrix r_m = pilot_matrix(pool, 2 + rep % 3, 1.0);
        const double lam = glrt_sync(y, r_m, r_s);
        const double diff = ml_score_sync(y, r_m) - ml_score_sync(y, r_s);
        EXPECT_NEAR(lam, diff, 1e-10 * y.frobenius_norm_sq());
        EXPECT_GE(lam, -1e-12);  // nested subspaces
    }
}

TEST(Glrt, NoiselessSimoGivesZero) {
    RngStream rng(5, 0);
    const auto pool = hadamard_pool(8);
    const ComplexMatrix h = sample_complex_gaussian(4, 1, 1.0, rng);
    const ComplexMatrix y = noiseless(h, pilot_matrix(pool, 1, 1.0));
    EXPECT_LE(std::abs(glrt_sync(y, pilot_matrix(pool, 4, 1.0), pilot_matrix(pool, 1, 1.0))), 1e-12 * y.frobenius_norm_sq());
}

TEST(ScaleInvariance, DecisionsUnchangedUnderScaling) {
    RngStream rng(6, 0);
    const auto pool = hadamard_pool(8);
    const auto hyp = build_hypotheses(pool, 4, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const ComplexMatrix y = sample_complex_gaussian(4, 8, 1.0, rng);
        const auto base_ml = ml_classify_sync(y, hyp).chosen;
        const auto base_corr = corr_classify(y, hyp).chosen;
        for (double c : {1e-3, 0.5, 7.0, 1e4}) {
            const ComplexMatrix ys = c * y;
            EXPECT_EQ(ml_classify_sync(ys, hyp).chosen, base_ml);
            EXPECT_EQ(corr_classify(ys, hyp).chosen, base_corr);
        }
    }
}

// Independent oracle: quadratic form of CN(mu, s2 I) rows in D = P_M - P_S.
// E = mu D mu^H + s2 tr D, Var = 2 s2 mu D^2 mu^H + s4 tr D^2, summed over m rows.
TEST(GlrtThreshold, MomentsMatchQuadraticFormOracle) {
    RngStream rng(7, 0);
    for (int rep = 0; rep < 5; ++rep) {
        const ComplexMatrix r_s = sample_complex_gaussian(1, 8, 1.0, rng);
        const ComplexMatrix r_m = sample_complex_gaussian(3, 8, 1.0, rng);
        const ComplexMatrix h_s = sample_complex_gaussian(4, 1, 1.0, rng);
        const double s2 = 0.3 + rep;
        const ComplexMatrix d = projection(r_m) - projection(r_s);
        const ComplexMatrix d2 = d * d;
        double mean = 0.0;
        double var = 0.0;
        for (std::size_t q = 0; q < 4; ++q) {
            const ComplexMatrix mu = h_s(q, 0) * r_s;
            mean += real_inner(mu.adjoint(), d * mu.adjoint()) + s2 * d.trace().real();
            var += 2.0 * s2 * real_inner(mu.adjoint(), d2 * mu.adjoint()) + s2 * s2 * d2.trace().real();
        }
        const auto model = glrt_threshold(0.1, r_m, r_s, h_s, s2);
        EXPECT_NEAR(model.mu_tilde, mean, 1e-9 * std::abs(mean) + 1e-12);
        EXPECT_NEAR(model.sigma2_tilde, var, 1e-9 * var);
        EXPECT_NEAR(model.tau_g, model.mu_tilde + std::sqrt(model.sigma2_tilde) * 1.2815515655446004, 1e-7 * var);
    }
}

TEST(GlrtThreshold, NestedHadamardReducesToGammaMoments) {
    const auto pool = hadamard_pool(8);
    RngStream rng(8, 0);
    const ComplexMatrix h_s = sample_complex_gaussian(4, 1, 1.0, rng);
    for (std::size_t n = 2; n <= 4; ++n) {
        const auto model = glrt_threshold(0.05, pilot_matrix(pool, n, 1.0), pilot_matrix(pool, 1, 1.0), h_s, 0.5);
        EXPECT_NEAR(model.mu_tilde, 4 * 0.5 * (n - 1.0), 1e-12);
        EXPECT_NEAR(model.sigma2_tilde, 4 * 0.25 * (n - 1.0), 1e-12);
    }
}

TEST(GlrtThreshold, Errors) {
    const auto pool = hadamard_pool(8);
    const ComplexMatrix h(4, 1, 1.0);
    for (double a : {0.0, 1.0}) {
        try {
            glrt_threshold(a, pilot_matrix(pool, 2, 1.0), pilot_matrix(pool, 1, 1.0), h, 1.0);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
        }
    }
    try {
        glrt_threshold(0.1, pilot_matrix(pool, 2, 1.0), pilot_matrix(pool, 2, 1.0), h, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(GlrtDetect, DesignedThresholdUsesLsSimoChannel) {
    const auto pool = hadamard_pool(8);
    RngStream rng(9, 0);
    const ComplexMatrix r_s = pilot_matrix(pool, 1, 1.0);
    const ComplexMatrix r_m = pilot_matrix(pool, 2, 1.0);
    const ComplexMatrix y = sample_complex_gaussian(4, 8, 1.0, rng);
    const auto d = glrt_detect_sync(y, r_m, r_s, 0.1, 1.0);
    const auto model = glrt_threshold(0.1, r_m, r_s, ls_channel(y, r_s), 1.0);
    EXPECT_DOUBLE_EQ(d.threshold, model.tau_g);
    EXPECT_EQ(d.decide_mimo, d.statistic >= model.tau_g);
}

class AsyncNoiseless : public ::testing::TestWithParam<std::size_t> {};

TEST_P(AsyncNoiseless, DelaySearchRecoversGridDelay) {
    const std::size_t n = GetParam();
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    const ComplexMatrix r = pilot_matrix(pool, n, 1.0);
    RngStream rng(10 + n, 0);
    const auto grid = delay_grid(cfg);
    for (double tau : grid) {
        const ComplexMatrix h = sample_complex_gaussian(4, n, 1.0, rng);
        const auto burst = synthesize_burst(h, r, 1.0, tau, cfg, rng);
        const auto bank = matched_filter_bank(burst, grid, 8);
        for (auto obj : {DelayObjective::Concentrated, DelayObjective::ProjectedEnergy}) {
            EXPECT_DOUBLE_EQ(delay_search_ml(bank, r, obj).tau, tau);
        }
        EXPECT_DOUBLE_EQ(corr_delay(bank, r), tau);
    }
}

INSTANTIATE_TEST_SUITE_P(Antennas, AsyncNoiseless, ::testing::Values(1, 2, 4));

// Truncation ISI leaks no SIMO energy into the 2-antenna subspace but about 1e-5 into the 4-antenna one.
TEST(AsyncNoiseless, SimoGlrtNearZero) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    RngStream rng(20, 0);
    for (std::size_t n : {2, 4}) {
        const ComplexMatrix h = sample_complex_gaussian(4, 1, 1.0, rng);
        const auto burst = synthesize_burst(h, pilot_matrix(pool, 1, 1.0), 1.0, 0.3125, cfg, rng);
        const auto bank = matched_filter_bank(burst, delay_grid(cfg), 8);
        const double lam = glrt_async(bank, pilot_matrix(pool, n, 1.0), pilot_matrix(pool, 1, 1.0));
        double energy = 0.0;
        for (const auto& y : bank.outputs) energy = std::max(energy, y.frobenius_norm_sq());
        EXPECT_GE(lam, -1e-12 * energy);
        EXPECT_LE(lam, (n == 2 ? 1e-6 : 1e-4) * energy) << "n " << n;
    }
}

TEST(AsyncNoiseless, MimoGlrtPositive) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    RngStream rng(23, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = rep % 2 ? 2 : 4;
        const ComplexMatrix r_m = pilot_matrix(pool, n, 1.0);
        const ComplexMatrix h = sample_complex_gaussian(4, n, 1.0, rng);
        const double tau = delay_grid(cfg)[rep % 9];
        const auto burst = synthesize_burst(h, r_m, 1.0, tau, cfg, rng);
        EXPECT_GT(glrt_async(burst, r_m, pilot_matrix(pool, 1, 1.0), delay_grid(cfg)), 0.0);
    }
}

TEST(MlAsync, NoiselessBinaryPicksTruth) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    const auto hyp = binary_hypotheses(pool, 2, 1.0);
    RngStream rng(21, 0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t j = rep % 2;
        const ComplexMatrix h = sample_complex_gaussian(4, hyp.antennas[j], 1.0, rng);
        const double tau = delay_grid(cfg)[rep % 9];
        const auto burst = synthesize_burst(h, hyp.pilots[j], 1.0, tau, cfg, rng);
        const auto res = ml_classify_async(burst, hyp, delay_grid(cfg));
        EXPECT_EQ(res.chosen, j);
        EXPECT_DOUBLE_EQ(*res.tau_hat[j], tau);
    }
}

// Beyond two antennas the ISI leakage exceeds the tie tolerance: the decision contains the true
// row space and the surplus score is below 1e-4 of the total.
TEST(MlAsync, NoiselessMulticlassContainsTruth) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    const auto hyp = build_hypotheses(pool, 4, 1.0);
    RngStream rng(24, 0);
    for (std::size_t n = 1; n <= 4; ++n) {
        const ComplexMatrix h = sample_complex_gaussian(4, n, 1.0, rng);
        const auto burst = synthesize_burst(h, hyp.pilots[n - 1], 1.0, 0.125, cfg, rng);
        const auto res = ml_classify_async(burst, hyp, delay_grid(cfg));
        EXPECT_GE(res.chosen_antennas, n);
        EXPECT_DOUBLE_EQ(*res.tau_hat[n - 1], 0.125);
        EXPECT_LE(res.scores[res.chosen] - res.scores[n - 1], 1e-4 * res.scores[n - 1]);
    }
}

TEST(MlAsync, TrueDelayDominatesWrongDelay) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    const ComplexMatrix r = pilot_matrix(pool, 2, 1.0);
    RngStream rng(25, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const ComplexMatrix h = sample_complex_gaussian(4, 2, 1.0, rng);
        const auto burst = synthesize_burst(h, r, 1.0, 0.25, cfg, rng);
        const auto best = delay_search_ml(burst, r, delay_grid(cfg));
        const double wrong = delay_grid(cfg)[rng.index(9)];
        if (wrong == 0.25) continue;
        const auto at_wrong = delay_search_ml(burst, r, {wrong});
        EXPECT_GE(best.score, at_wrong.score);
    }
}

TEST(MatchedFilterEnergy, PeaksAtTrueDelay) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    RngStream rng(26, 0);
    for (double tau : delay_grid(cfg)) {
        const ComplexMatrix r = pilot_matrix(pool, 2, 1.0);
        const auto burst = synthesize_burst(sample_complex_gaussian(4, 2, 1.0, rng), r, 1.0, tau, cfg, rng);
        const auto bank = matched_filter_bank(burst, delay_grid(cfg), 8);
        std::size_t best = 0;
        for (std::size_t i = 1; i < bank.size(); ++i)
            if (bank.outputs[i].frobenius_norm_sq() > bank.outputs[best].frobenius_norm_sq()) best = i;
        EXPECT_DOUBLE_EQ(bank.grid[best], tau);
    }
}

TEST(Corr, IgnoredModeReadsZeroDelay) {
    const SignalConfig cfg;
    const auto pool = hadamard_pool(8);
    const auto hyp = binary_hypotheses(pool, 2, 1.0);
    RngStream rng(22, 0);
    const ComplexMatrix h = sample_complex_gaussian(4, 2, 1.0, rng);
    const auto burst = synthesize_burst(h, hyp.pilots[1], 1.0, 0.375, cfg, rng);
    const auto ignored = corr_classify(burst, hyp, CorrMode::AsyncIgnored, delay_grid(cfg));
    const auto estimated = corr_classify(burst, hyp, CorrMode::AsyncEstimated, delay_grid(cfg));
    EXPECT_DOUBLE_EQ(*ignored.tau_hat[0], 0.0);
    EXPECT_DOUBLE_EQ(*estimated.tau_hat[1], 0.375);
    const ComplexMatrix y0 = matched_filter(burst, 0.0, 8);
    EXPECT_NEAR(ignored.scores[1], corr_score(y0, hyp.pilots[1]), 1e-9 * ignored.scores[1]);
}
