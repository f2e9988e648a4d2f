#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pilot_clf/error.hpp"

namespace pilot_clf {

using cplx = std::complex<double>;

/**
 * Dense row-major complex matrix.
 *
 * Sized for the small problems in this library (pilot matrices, channel
 * matrices, L x L projectors); no expression templates, no blocking.
 */
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, cplx fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) {
                throw Error(ErrorKind::DimensionMismatch, "ragged initializer list");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix diagonal(std::initializer_list<double> values) {
        ComplexMatrix m(values.size(), values.size());
        std::size_t i = 0;
        for (double v : values) {
            m(i, i) = v;
            ++i;
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    ComplexMatrix adjoint() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    ComplexMatrix transpose() const {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
        return out;
    }

    /// The first `count` rows as a new matrix.
    ComplexMatrix top_rows(std::size_t count) const {
        if (count > rows_) throw Error(ErrorKind::DimensionMismatch, "top_rows beyond matrix");
        ComplexMatrix out(count, cols_);
        std::copy_n(data_.begin(), count * cols_, out.data_.begin());
        return out;
    }

    cplx trace() const {
        if (!is_square()) throw Error(ErrorKind::DimensionMismatch, "trace of non-square matrix");
        cplx t = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm_sq() const {
        double s = 0.0;
        for (const auto& v : data_) s += std::norm(v);
        return s;
    }

    double frobenius_norm() const { return std::sqrt(frobenius_norm_sq()); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(),
                           [](const cplx& v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); });
    }

    ComplexMatrix& operator+=(const ComplexMatrix& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
        return *this;
    }

    ComplexMatrix& operator-=(const ComplexMatrix& other) {
        require_same_shape(other);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
        return *this;
    }

    ComplexMatrix& operator*=(cplx s) {
        for (auto& v : data_) v *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
    friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        if (a.cols_ != b.rows_) {
            throw Error(ErrorKind::DimensionMismatch, "product of " + a.shape() + " and " + b.shape());
        }
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            cplx* orow = out.data_.data() + i * b.cols_;
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                if (aik == cplx{}) continue;
                const cplx* brow = b.data_.data() + k * b.cols_;
                for (std::size_t j = 0; j < b.cols_; ++j) orow[j] += aik * brow[j];
            }
        }
        return out;
    }

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

    std::string shape() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

private:
    void require_same_shape(const ComplexMatrix& other) const {
        if (rows_ != other.rows_ || cols_ != other.cols_) {
            throw Error(ErrorKind::DimensionMismatch, shape() + " vs " + other.shape());
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

/// Frobenius norm of a - b.
inline double frobenius_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).frobenius_norm();
}

/// Re tr(a^H b), the real Frobenius inner product.
inline double real_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "inner product of " + a.shape() + " and " + b.shape());
    }
    double s = 0.0;
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) s += (std::conj(da[i]) * db[i]).real();
    return s;
}

/**
 * Deterministic random substream keyed by (master seed, stream id, tag).
 *
 * The engine state depends only on the key, so trial i draws the same
 * numbers whichever worker runs it and however many run alongside.
 */
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t tag = 0)
        : master_seed_(master_seed), stream_id_(stream_id), tag_(tag), engine_(make_engine(master_seed, stream_id, tag)) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Independent child stream, e.g. for EM restarts inside one trial.
    RngStream derive(std::uint64_t tag) const { return RngStream(master_seed_, stream_id_, tag_ * 0x9E3779B97F4A7C15ULL + tag + 1); }

    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() { return normal_(engine_); }

    std::size_t index(std::size_t count) {
        std::uniform_int_distribution<std::size_t> d(0, count - 1);
        return d(engine_);
    }

    /// Circular complex normal with E|z|^2 = variance.
    cplx complex_normal(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

private:
    static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
        return std::mt19937_64(seq);
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t tag_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// rows x cols matrix of iid CN(0, variance) entries.
inline ComplexMatrix sample_complex_gaussian(std::size_t rows, std::size_t cols, double variance, RngStream& rng) {
    if (!(variance >= 0.0)) throw Error(ErrorKind::OutOfRange, "variance must be non-negative");
    ComplexMatrix m(rows, cols);
    if (variance == 0.0) return m;
    for (auto& v : m.data()) v = rng.complex_normal(variance);
    return m;
}

/**
 * Inverse of a Hermitian positive-definite matrix via Cholesky (A = L L^H).
 *
 * A pivot at or below 1e-12 * ||A||_F is reported as NotPositiveDefinite.
 */
inline ComplexMatrix hermitian_inverse(const ComplexMatrix& a) {
    if (!a.is_square()) throw Error(ErrorKind::DimensionMismatch, "hermitian_inverse of " + a.shape());
    const std::size_t n = a.rows();
    const double norm = a.frobenius_norm();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (std::abs(a(i, j) - std::conj(a(j, i))) > 1e-9 * std::max(1.0, norm)) {
                throw Error(ErrorKind::NotPositiveDefinite, "matrix is not Hermitian");
            }
    const double pivot_floor = 1e-12 * norm;

    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > pivot_floor)) {
            throw Error(ErrorKind::NotPositiveDefinite, "pivot " + std::to_string(d) + " at column " + std::to_string(j));
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }

    // Solve L L^H X = I column by column.
    ComplexMatrix inv(n, n);
    std::vector<cplx> z(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            cplx s = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * z[k];
            z[i] = s / l(i, i);
        }
        for (std::size_t ii = n; ii-- > 0;) {
            cplx s = z[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= std::conj(l(k, ii)) * inv(k, col);
            inv(ii, col) = s / l(ii, ii);
        }
    }
    return inv;
}

/// Orthogonal projector R^H (R R^H)^{-1} R onto the row space of R (n x L, n <= L).
inline ComplexMatrix projection(const ComplexMatrix& r) {
    if (r.rows() == 0 || r.rows() > r.cols()) {
        throw Error(ErrorKind::RankDeficient, "projection needs 0 < rows <= cols, got " + r.shape());
    }
    const ComplexMatrix rh = r.adjoint();
    ComplexMatrix gram_inv;
    try {
        gram_inv = hermitian_inverse(r * rh);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::NotPositiveDefinite) {
            throw Error(ErrorKind::RankDeficient, "R R^H is not positive definite");
        }
        throw;
    }
    return rh * gram_inv * r;
}

/// Standard normal upper tail probability Q(x).
inline double gaussian_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

/**
 * Q^{-1}(alpha): rational approximation of the normal quantile (Acklam)
 * followed by one Newton step on Q(x) - alpha.
 */
inline double gaussian_tail_inverse(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error(ErrorKind::OutOfRange, "gaussian_tail_inverse needs alpha in (0,1), got " + std::to_string(alpha));
    }
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    // Lower-tail quantile of p = 1 - alpha.
    const double p = 1.0 - alpha;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        // Use alpha directly so small tails keep their precision.
        const double q = std::sqrt(-2.0 * std::log(alpha));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    if (density > 0.0) x += (gaussian_tail(x) - alpha) / density;
    return x;
}

/// log(sum(exp(v))) without overflow; -inf for an empty input.
inline double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -INFINITY;
    const double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

}  // namespace pilot_clf
