#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/matrix.hpp"
#include "sparsefact/rng.hpp"

// Generative model: each column of a factor is the sum of d independent
// 1-sparse spikes (uniform position, +/-1 sign). Colliding spikes add, so a
// value may exceed 1 in magnitude; positions whose signed sum cancels to
// zero are dropped. Consequently every column satisfies
//   sum |value| <= d   and   sum |value| == d (mod 2).

namespace sparsefact {

struct ModelParams {
    int n = 0;
    int d = 0;
    int s = 1;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (n < 2) throw Error("ModelParams: n must be >= 2");
        if (d < 1 || d > n) throw Error("ModelParams: need 1 <= d <= n");
        if (s < 1) throw Error("ModelParams: s must be >= 1");
    }
};

inline std::vector<std::pair<int, std::int32_t>> gen_sparse_column(int n, int d,
                                                                   std::uint64_t substream) {
    SplitMix64 rng(substream);
    // d is small; a flat (position, sign) list beats a map here.
    std::vector<std::pair<int, std::int32_t>> spikes;
    spikes.reserve(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        int pos = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
        std::int32_t sign = (rng.next() >> 63) == 0 ? 1 : -1;
        spikes.emplace_back(pos, sign);
    }
    std::sort(spikes.begin(), spikes.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, std::int32_t>> col;
    std::size_t i = 0;
    while (i < spikes.size()) {
        int pos = spikes[i].first;
        std::int32_t v = 0;
        while (i < spikes.size() && spikes[i].first == pos) {
            v += spikes[i].second;
            ++i;
        }
        if (v != 0) col.emplace_back(pos, v);
    }
    return col;
}

// Layer index is 0-based internally; substreams are independent per
// (layer, column), so generation order (and any parallel split) is
// irrelevant to the result.
inline SparseIntMatrix gen_factor(int n, int d, std::uint64_t master, int layer) {
    SparseIntMatrix m(n, 0);
    for (int j = 0; j < n; ++j)
        m.push_column(gen_sparse_column(
            n, d, substream_seed(master, static_cast<std::uint64_t>(layer),
                                 static_cast<std::uint64_t>(j))));
    return m;
}

inline std::vector<SparseIntMatrix> gen_factor_chain(const ModelParams& p) {
    p.validate();
    std::vector<SparseIntMatrix> out;
    out.reserve(static_cast<std::size_t>(p.s));
    for (int layer = 0; layer < p.s; ++layer)
        out.push_back(gen_factor(p.n, p.d, p.master_seed, layer));
    return out;
}

// sparse * dense, out = X * acc. CSC makes column-of-X scatter natural:
// out[r, :] += X[r, k] * acc[k, :].
inline void sparse_dense_mul(const SparseIntMatrix& x, const DenseMatrix& acc,
                             DenseMatrix& out) {
    if (x.cols() != acc.rows())
        throw DimensionMismatch("sparse_dense_mul: inner dimensions differ");
    out = DenseMatrix(x.rows(), acc.cols());
    const int m = acc.cols();
    for (int k = 0; k < x.cols(); ++k) {
        for (std::int64_t e = x.col_begin(k); e < x.col_end(k); ++e) {
            const int r = x.entry_row(e);
            const double v = static_cast<double>(x.entry_value(e));
            const double* src = acc.data().data() + static_cast<std::size_t>(k) * m;
            double* dst = out.data().data() + static_cast<std::size_t>(r) * m;
            for (int c = 0; c < m; ++c) dst[c] += v * src[c];
        }
    }
}

// Y = X_1 X_2 ... X_s * (1/sqrt(d))^s, accumulated right-to-left so the
// result is bitwise reproducible regardless of thread count.
inline DenseMatrix forward_product(const std::vector<SparseIntMatrix>& factors, int d) {
    if (factors.empty()) throw Error("forward_product: no factors");
    if (d < 1) throw Error("forward_product: d must be >= 1");
    const int n = factors.front().rows();
    for (const auto& f : factors)
        if (f.rows() != n || f.cols() != n)
            throw DimensionMismatch("forward_product: factors must be square and same order");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    DenseMatrix acc = DenseMatrix::from_eigen(factors.back().to_dense() * scale);
    for (std::size_t i = factors.size() - 1; i-- > 0;) {
        DenseMatrix next;
        sparse_dense_mul(factors[i], acc, next);
        next.map() *= scale;
        acc = std::move(next);
    }
    return acc;
}

// Rounding the Gram product needs entries resolved to well under O(1/n^3);
// double precision covers that comfortably at desk scale, and this guard
// only trips if someone pushes far beyond it.
inline bool precision_suspect(int n, int s) {
    return static_cast<double>(s) * std::log2(static_cast<double>(n)) * 1e-15 > 1e-9;
}

}  // namespace sparsefact
