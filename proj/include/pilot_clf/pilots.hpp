#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "pilot_clf/error.hpp"
#include "pilot_clf/numerics.hpp"

namespace pilot_clf {

enum class PoolKind { Hadamard, Dft };
enum class Knowledge { Exact, PoolOnly };

/// L x L matrix whose columns are mutually orthogonal pilot sequences; Q^H Q = gram_scale * I.
struct PilotPool {
    ComplexMatrix q;
    PoolKind kind = PoolKind::Hadamard;
    double gram_scale = 0.0;

    std::size_t length() const { return q.rows(); }
};

namespace detail {

inline bool is_prime(std::size_t v) {
    if (v < 2) return false;
    for (std::size_t d = 2; d * d <= v; ++d)
        if (v % d == 0) return false;
    return true;
}

/// Paley construction I for a prime q = 3 (mod 4); returns a (q+1) x (q+1) Hadamard matrix.
inline std::vector<std::vector<int>> paley_hadamard(std::size_t q) {
    std::vector<int> chi(q, -1);
    chi[0] = 0;
    for (std::size_t x = 1; x < q; ++x) chi[(x * x) % q] = 1;

    const std::size_t n = q + 1;
    std::vector<std::vector<int>> h(n, std::vector<int>(n, 0));
    // H = I + S with S = [[0, 1^T], [-1, Jacobsthal]] skew-symmetric.
    for (std::size_t j = 1; j < n; ++j) {
        h[0][j] = 1;
        h[j][0] = -1;
    }
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < q; ++j) h[i + 1][j + 1] = chi[(j + q - i) % q];
    for (std::size_t i = 0; i < n; ++i) h[i][i] += 1;
    return h;
}

inline std::vector<std::vector<int>> sylvester_double(const std::vector<std::vector<int>>& h) {
    const std::size_t n = h.size();
    std::vector<std::vector<int>> out(2 * n, std::vector<int>(2 * n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            out[i][j] = h[i][j];
            out[i][j + n] = h[i][j];
            out[i + n][j] = h[i][j];
            out[i + n][j + n] = -h[i][j];
        }
    return out;
}

}  // namespace detail

/**
 * Columns of an L x L Hadamard matrix.
 *
 * Sylvester doubling of either [1] or a Paley (prime q = 3 mod 4) core, so
 * L = 2^k or L = 2^k (q + 1); L = 12 comes from q = 11.
 */
inline PilotPool hadamard_pool(std::size_t length) {
    if (length == 0) throw Error(ErrorKind::UnsupportedOrder, "Hadamard order 0");
    const auto paley_core = [](std::size_t c) { return c >= 4 && detail::is_prime(c - 1) && (c - 1) % 4 == 3; };
    const bool power_of_two = (length & (length - 1)) == 0;
    std::size_t core = length;
    std::size_t doublings = 0;
    if (power_of_two) {
        while (core > 1) {
            core /= 2;
            ++doublings;
        }
    } else {
        while (!paley_core(core) && core % 2 == 0) {
            core /= 2;
            ++doublings;
        }
    }
    std::vector<std::vector<int>> h;
    if (core == 1) {
        h = {{1}};
    } else if (paley_core(core)) {
        h = detail::paley_hadamard(core - 1);
    } else {
        throw Error(ErrorKind::UnsupportedOrder, "no Hadamard construction for L = " + std::to_string(length));
    }
    for (std::size_t i = 0; i < doublings; ++i) h = detail::sylvester_double(h);

    PilotPool pool;
    pool.kind = PoolKind::Hadamard;
    pool.q = ComplexMatrix(length, length);
    for (std::size_t i = 0; i < length; ++i)
        for (std::size_t j = 0; j < length; ++j) pool.q(i, j) = static_cast<double>(h[i][j]);
    pool.gram_scale = static_cast<double>(length);
    return pool;
}

/// Columns of the unnormalised L-point DFT matrix; works for any L.
inline PilotPool dft_pool(std::size_t length) {
    if (length == 0) throw Error(ErrorKind::UnsupportedOrder, "DFT order 0");
    PilotPool pool;
    pool.kind = PoolKind::Dft;
    pool.q = ComplexMatrix(length, length);
    for (std::size_t i = 0; i < length; ++i)
        for (std::size_t j = 0; j < length; ++j) {
            const double phase = -2.0 * std::numbers::pi * static_cast<double>((i * j) % length) / static_cast<double>(length);
            pool.q(i, j) = std::polar(1.0, phase);
        }
    pool.gram_scale = static_cast<double>(length);
    return pool;
}

inline PilotPool make_pool(PoolKind kind, std::size_t length) {
    return kind == PoolKind::Hadamard ? hadamard_pool(length) : dft_pool(length);
}

/// Pilot matrix for n antennas: the chosen pool columns as rows, scaled by amp / sqrt(n).
inline ComplexMatrix pilot_rows(const PilotPool& pool, const std::vector<std::size_t>& columns, double amp) {
    const std::size_t len = pool.length();
    const double scale = amp / std::sqrt(static_cast<double>(columns.size()));
    ComplexMatrix r(columns.size(), len);
    for (std::size_t i = 0; i < columns.size(); ++i)
        for (std::size_t l = 0; l < len; ++l) r(i, l) = scale * pool.q(l, columns[i]);
    return r;
}

inline ComplexMatrix pilot_matrix(const PilotPool& pool, std::size_t antennas, double amp) {
    if (antennas == 0 || antennas > pool.length()) {
        throw Error(ErrorKind::TooManyAntennas,
                    std::to_string(antennas) + " antennas with pilot length " + std::to_string(pool.length()));
    }
    std::vector<std::size_t> cols(antennas);
    for (std::size_t i = 0; i < antennas; ++i) cols[i] = i;
    return pilot_rows(pool, cols, amp);
}

/// Candidate transmit systems, each with its pilot matrix R_j (equal total pilot energy).
struct HypothesisSet {
    std::vector<std::size_t> antennas;
    std::vector<ComplexMatrix> pilots;
    double pilot_amp = 1.0;
    Knowledge knowledge = Knowledge::Exact;
    PilotPool pool;

    std::size_t size() const { return antennas.size(); }
    std::size_t n_max() const { return antennas.empty() ? 0 : antennas.back(); }
};

inline HypothesisSet hypotheses_for(const PilotPool& pool, const std::vector<std::size_t>& antennas, double amp,
                                    Knowledge knowledge) {
    HypothesisSet set;
    set.antennas = antennas;
    set.pilot_amp = amp;
    set.knowledge = knowledge;
    set.pool = pool;
    for (std::size_t n : antennas) set.pilots.push_back(pilot_matrix(pool, n, amp));
    return set;
}

/// Hypotheses n = 1..n_max using the first n pool columns.
inline HypothesisSet build_hypotheses(const PilotPool& pool, std::size_t n_max, double amp,
                                      Knowledge knowledge = Knowledge::Exact) {
    if (n_max == 0 || n_max > pool.length()) {
        throw Error(ErrorKind::TooManyAntennas,
                    "n_max " + std::to_string(n_max) + " with pilot length " + std::to_string(pool.length()));
    }
    std::vector<std::size_t> antennas(n_max);
    for (std::size_t j = 0; j < n_max; ++j) antennas[j] = j + 1;
    return hypotheses_for(pool, antennas, amp, knowledge);
}

/// SIMO (n = 1) versus an n_mimo-antenna MIMO system.
inline HypothesisSet binary_hypotheses(const PilotPool& pool, std::size_t n_mimo, double amp,
                                       Knowledge knowledge = Knowledge::Exact) {
    if (n_mimo < 2 || n_mimo > pool.length()) {
        throw Error(ErrorKind::TooManyAntennas, "MIMO antenna count " + std::to_string(n_mimo));
    }
    return hypotheses_for(pool, {1, n_mimo}, amp, knowledge);
}

/// All ordered selections of n distinct pool columns (uniform prior).
struct AssignmentEnumeration {
    std::vector<ComplexMatrix> assignments;
    std::vector<std::vector<std::size_t>> columns;
    double prior = 0.0;

    std::size_t size() const { return assignments.size(); }
};

inline constexpr std::size_t kDefaultEnumerationCap = 100000;

/// L! / (L - n)!, or cap + 1 once it exceeds cap.
inline std::size_t assignment_count(std::size_t length, std::size_t n, std::size_t cap) {
    std::size_t count = 1;
    for (std::size_t i = 0; i < n; ++i) {
        count *= (length - i);
        if (count > cap) return cap + 1;
    }
    return count;
}

inline AssignmentEnumeration enumerate_assignments(const PilotPool& pool, std::size_t n, double amp,
                                                   std::size_t cap = kDefaultEnumerationCap) {
    const std::size_t len = pool.length();
    if (n == 0 || n > len) throw Error(ErrorKind::TooManyAntennas, "cannot assign " + std::to_string(n) + " pilots");
    const std::size_t count = assignment_count(len, n, cap);
    if (count > cap) {
        throw Error(ErrorKind::EnumerationTooLarge, std::to_string(len) + "!/(" + std::to_string(len) + "-" +
                                                        std::to_string(n) + ")! exceeds cap " + std::to_string(cap));
    }

    AssignmentEnumeration out;
    out.assignments.reserve(count);
    out.columns.reserve(count);
    std::vector<std::size_t> pick;
    std::vector<bool> used(len, false);
    auto recurse = [&](auto&& self) -> void {
        if (pick.size() == n) {
            out.columns.push_back(pick);
            out.assignments.push_back(pilot_rows(pool, pick, amp));
            return;
        }
        for (std::size_t c = 0; c < len; ++c) {
            if (used[c]) continue;
            used[c] = true;
            pick.push_back(c);
            self(self);
            pick.pop_back();
            used[c] = false;
        }
    };
    recurse(recurse);
    out.prior = 1.0 / static_cast<double>(out.assignments.size());
    return out;
}

/// Degenerate enumeration holding only the known pilot matrix.
inline AssignmentEnumeration single_assignment(const ComplexMatrix& pilots) {
    AssignmentEnumeration out;
    out.assignments.push_back(pilots);
    out.columns.emplace_back();
    out.prior = 1.0;
    return out;
}

}  // namespace pilot_clf
