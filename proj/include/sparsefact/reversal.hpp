#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/matrix.hpp"
#include "sparsefact/rng.hpp"

// Layer reversal: recover the hidden input z from y = W z with W = X/sqrt(d),
// by initializing z_1 = W^T y and iterating z <- z + gamma W^T (y - W z).
// The residual evolves as r_{k+1} = (I - gamma W W^T) r_k, so any
// gamma < 2 / lambda_max(W W^T) contracts it on range(W); we use
// gamma = 1 / lambda_max, which additionally makes every eigenvalue of the
// iteration matrix land in [0, 1) and the residual norm monotone.
// (The step-size condition is often misstated as gamma being smaller than
// the largest eigenvalue itself; that version is dimensionally off.)

namespace sparsefact {

struct ReverseResult {
    std::vector<double> z_hat;
    int iterations = 0;
    std::vector<double> residual_history;  // ||y - W z||_2, length = iterations + 1
    bool converged = false;
};

namespace rev_detail {

// w_out = (X/sqrt(d)) v  -- CSC column scatter
inline void apply_w(const SparseIntMatrix& x, double inv_sqrt_d, const std::vector<double>& v,
                    std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(x.rows()), 0.0);
    for (int j = 0; j < x.cols(); ++j) {
        const double vj = v[static_cast<std::size_t>(j)];
        if (vj == 0.0) continue;
        for (std::int64_t e = x.col_begin(j); e < x.col_end(j); ++e)
            out[static_cast<std::size_t>(x.entry_row(e))] += x.entry_value(e) * vj;
    }
    for (double& o : out) o *= inv_sqrt_d;
}

// w_out = (X/sqrt(d))^T v  -- CSC column dot products
inline void apply_wt(const SparseIntMatrix& x, double inv_sqrt_d, const std::vector<double>& v,
                     std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(x.cols()), 0.0);
    for (int j = 0; j < x.cols(); ++j) {
        double acc = 0.0;
        for (std::int64_t e = x.col_begin(j); e < x.col_end(j); ++e)
            acc += x.entry_value(e) * v[static_cast<std::size_t>(x.entry_row(e))];
        out[static_cast<std::size_t>(j)] = acc * inv_sqrt_d;
    }
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace rev_detail

// Step size from a power-iteration estimate of lambda_max(W W^T): the
// Rayleigh quotient climbs monotonically toward lambda_max from below, so
// gamma = 1 / lambda_hat errs on the side of a marginally larger step --
// still within the 2/lambda_max contraction window for any sane estimate.
inline double estimate_gamma(const SparseIntMatrix& x, int d, int power_iters = 100) {
    if (x.rows() != x.cols()) throw DimensionMismatch("estimate_gamma: X must be square");
    if (d < 1) throw Error("estimate_gamma: d must be >= 1");
    if (power_iters < 10) throw Error("estimate_gamma: power_iters must be >= 10");
    if (x.nnz() == 0) throw ZeroMatrix("estimate_gamma: X is the zero matrix");
    const int n = x.rows();
    const double isd = 1.0 / std::sqrt(static_cast<double>(d));
    SplitMix64 rng(0xa11ce5eed0f9e2b7ull);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& e : v) e = rng.next_sym();
    std::vector<double> wt, bv;
    double lambda = 0.0;
    for (int it = 0; it < power_iters; ++it) {
        rev_detail::apply_wt(x, isd, v, wt);
        rev_detail::apply_w(x, isd, wt, bv);  // bv = W W^T v
        double dot = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            dot += v[i] * bv[i];
            nn += bv[i] * bv[i];
        }
        const double bnorm = std::sqrt(nn);
        if (bnorm == 0.0) {
            // v landed exactly in the kernel; restart from a fresh vector
            for (double& e : v) e = rng.next_sym();
            continue;
        }
        lambda = dot;  // Rayleigh quotient of the unit v
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = bv[i] / bnorm;
    }
    if (lambda <= 0.0) throw ZeroMatrix("estimate_gamma: W W^T has no positive eigenvalue mass");
    return 1.0 / lambda;
}

inline ReverseResult reverse_iterate(const SparseIntMatrix& x, int d, const std::vector<double>& y,
                                     double gamma, int max_iters, double tol = 1e-10) {
    if (x.rows() != static_cast<int>(y.size()))
        throw DimensionMismatch("reverse_iterate: |y| != rows of X");
    if (d < 1) throw Error("reverse_iterate: d must be >= 1");
    if (gamma <= 0.0) throw Error("reverse_iterate: gamma must be positive");
    if (max_iters < 0) throw Error("reverse_iterate: max_iters must be >= 0");
    const double isd = 1.0 / std::sqrt(static_cast<double>(d));

    ReverseResult res;
    rev_detail::apply_wt(x, isd, y, res.z_hat);  // z_1 = W^T y
    const double ynorm = rev_detail::norm2(y);
    std::vector<double> wz, r(y.size()), step;
    for (int it = 0;; ++it) {
        rev_detail::apply_w(x, isd, res.z_hat, wz);
        for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - wz[i];
        const double rnorm = rev_detail::norm2(r);
        res.residual_history.push_back(rnorm);
        res.iterations = it;
        if (rnorm <= tol * ynorm) {
            res.converged = true;
            return res;
        }
        if (it == max_iters) return res;  // converged stays false
        rev_detail::apply_wt(x, isd, r, step);
        for (std::size_t i = 0; i < res.z_hat.size(); ++i) res.z_hat[i] += gamma * step[i];
    }
}

// Convenience wrapper with the default budget and an estimated step size.
inline ReverseResult reverse_layer(const SparseIntMatrix& x, int d, const std::vector<double>& y,
                                   double tol = 1e-10, int max_iters = -1) {
    if (max_iters < 0) max_iters = 100 * std::max(1, x.rows());
    return reverse_iterate(x, d, y, estimate_gamma(x, d), max_iters, tol);
}

}  // namespace sparsefact
