#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pilot_clf/pilots.hpp"

using namespace pilot_clf;

namespace {

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
    return d;
}

}  // namespace

class HadamardOrders : public ::testing::TestWithParam<std::size_t> {};

TEST_P(HadamardOrders, OrthogonalPlusMinusOne) {
    const std::size_t len = GetParam();
    const auto pool = hadamard_pool(len);
    const ComplexMatrix gram = pool.q.adjoint() * pool.q;
    EXPECT_LT(max_abs_diff(gram, static_cast<double>(len) * ComplexMatrix::identity(len)), 1e-12);
    for (auto v : pool.q.data()) EXPECT_TRUE(v == cplx(1.0) || v == cplx(-1.0));
}

INSTANTIATE_TEST_SUITE_P(Pool, HadamardOrders, ::testing::Values(1, 2, 4, 8, 12, 16, 20, 24, 32));

TEST(HadamardPool, SylvesterFirstColumnIsAllOnes) {
    const auto pool = hadamard_pool(8);
    for (std::size_t l = 0; l < 8; ++l) EXPECT_EQ(pool.q(l, 0), cplx(1.0));
}

TEST(HadamardPool, UnsupportedOrders) {
    for (std::size_t len : {0, 3, 6, 10}) {
        try {
            hadamard_pool(len);
            FAIL() << len;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::UnsupportedOrder);
        }
    }
}

TEST(DftPool, OrthogonalForAnyLength) {
    for (std::size_t len : {3, 5, 8, 10}) {
        const auto pool = dft_pool(len);
        const ComplexMatrix gram = pool.q.adjoint() * pool.q;
        EXPECT_LT(max_abs_diff(gram, static_cast<double>(len) * ComplexMatrix::identity(len)), 1e-10);
    }
}

TEST(PilotMatrix, EqualTotalEnergyAcrossAntennaCounts) {
    const auto pool = hadamard_pool(8);
    for (std::size_t n = 1; n <= 8; ++n) {
        const ComplexMatrix r = pilot_matrix(pool, n, 1.5);
        EXPECT_NEAR(r.frobenius_norm_sq(), 1.5 * 1.5 * 8.0, 1e-12);
        const ComplexMatrix rr = r * r.adjoint();
        EXPECT_LT(max_abs_diff(rr, (1.5 * 1.5 * 8.0 / n) * ComplexMatrix::identity(n)), 1e-12);
    }
    try {
        pilot_matrix(pool, 9, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooManyAntennas);
    }
}

TEST(Hypotheses, BuildAndBinary) {
    const auto pool = hadamard_pool(8);
    const auto hyp = build_hypotheses(pool, 4, 1.0);
    ASSERT_EQ(hyp.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(hyp.pilots[j].rows(), j + 1);
    const auto bin = binary_hypotheses(pool, 4, 1.0);
    ASSERT_EQ(bin.antennas, (std::vector<std::size_t>{1, 4}));
    try {
        build_hypotheses(pool, 9, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::TooManyAntennas);
    }
}

TEST(Assignments, PermutationCountsAndDistinctColumns) {
    const auto pool = hadamard_pool(8);
    EXPECT_EQ(enumerate_assignments(pool, 1, 1.0).size(), 8u);
    EXPECT_EQ(enumerate_assignments(pool, 2, 1.0).size(), 56u);
    const auto four = enumerate_assignments(pool, 4, 1.0);
    EXPECT_EQ(four.size(), 1680u);
    EXPECT_DOUBLE_EQ(four.prior, 1.0 / 1680.0);
    std::set<std::vector<std::size_t>> unique(four.columns.begin(), four.columns.end());
    EXPECT_EQ(unique.size(), 1680u);
    for (const auto& c : four.columns) EXPECT_EQ(std::set<std::size_t>(c.begin(), c.end()).size(), 4u);
}

TEST(Assignments, CapIsEnforced) {
    const auto pool = hadamard_pool(16);
    EXPECT_EQ(assignment_count(16, 5, kDefaultEnumerationCap), kDefaultEnumerationCap + 1);  // 524160 > 1e5
    try {
        enumerate_assignments(pool, 5, 1.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EnumerationTooLarge);
    }
    EXPECT_EQ(enumerate_assignments(pool, 2, 1.0, 300).size(), 240u);
}
