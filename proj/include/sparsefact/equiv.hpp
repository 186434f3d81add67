#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/genmodel.hpp"
#include "sparsefact/matrix.hpp"

// Equivalence up to the symmetries the model cannot see: permuting columns
// of a factor and flipping their signs leaves X X^T (and, with the matching
// row operation on the next factor, the whole product) unchanged. Factors
// are therefore compared as multisets of sign-canonical columns.

namespace sparsefact {

namespace equiv_detail {

using Key = std::vector<std::pair<int, std::int32_t>>;

// Canonical form of one column: entries ascending by row, flipped so the
// first nonzero is positive. Returns the flip that was applied.
inline std::pair<Key, int> canonical_column(const SparseIntMatrix& x, int j) {
    Key key;
    for (std::int64_t e = x.col_begin(j); e < x.col_end(j); ++e)
        key.emplace_back(x.entry_row(e), x.entry_value(e));
    int flip = 1;
    if (!key.empty() && key.front().second < 0) {
        flip = -1;
        for (auto& [r, v] : key) v = -v;
    }
    return {std::move(key), flip};
}

}  // namespace equiv_detail

// Columns sign-normalized and re-sorted into a canonical order, so that two
// factors are equivalent exactly when their canonical forms are equal.
inline SparseIntMatrix canonical_form(const SparseIntMatrix& x) {
    std::vector<equiv_detail::Key> cols;
    cols.reserve(static_cast<std::size_t>(x.cols()));
    for (int j = 0; j < x.cols(); ++j) cols.push_back(equiv_detail::canonical_column(x, j).first);
    std::sort(cols.begin(), cols.end());
    std::vector<Triplet> ts;
    for (int j = 0; j < x.cols(); ++j)
        for (const auto& [row, val] : cols[static_cast<std::size_t>(j)]) ts.push_back({row, j, val});
    return SparseIntMatrix::from_triplets(x.rows(), x.cols(), std::move(ts));
}

struct MatchResult {
    int matched = 0;
    int mismatched = 0;
    std::vector<int> permutation;  // per column of A: matched column of B, or -1
    std::vector<int> flips;        // per column of A: +1/-1 so col_A = flip * col_B, 0 if unmatched

    bool exact() const { return mismatched == 0; }
};

// Greedy multiset matching of canonical columns. Duplicate columns are
// matched by multiplicity; the permutation for equal columns is chosen in
// ascending index order, which keeps the result deterministic.
inline MatchResult match_factors(const SparseIntMatrix& a, const SparseIntMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("match_factors: shapes differ (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
    std::map<equiv_detail::Key, std::vector<std::pair<int, int>>> pool;  // key -> (col of B, flip of B)
    for (int j = 0; j < b.cols(); ++j) {
        auto [key, flip] = equiv_detail::canonical_column(b, j);
        pool[std::move(key)].emplace_back(j, flip);
    }
    MatchResult res;
    res.permutation.assign(static_cast<std::size_t>(a.cols()), -1);
    res.flips.assign(static_cast<std::size_t>(a.cols()), 0);
    for (int j = 0; j < a.cols(); ++j) {
        auto [key, flip_a] = equiv_detail::canonical_column(a, j);
        auto it = pool.find(key);
        if (it == pool.end() || it->second.empty()) {
            ++res.mismatched;
            continue;
        }
        const auto [col_b, flip_b] = it->second.front();
        it->second.erase(it->second.begin());
        res.permutation[static_cast<std::size_t>(j)] = col_b;
        res.flips[static_cast<std::size_t>(j)] = flip_a * flip_b;
        ++res.matched;
    }
    return res;
}

// Relative Frobenius distance between scale^s X_1 ... X_s and Y.
inline double reconstruction_error(const std::vector<SparseIntMatrix>& factors, double layer_scale,
                                   const DenseMatrix& y) {
    if (factors.empty()) throw Error("reconstruction_error: no factors");
    DenseMatrix prod = DenseMatrix::from_eigen(factors.back().to_dense() * layer_scale);
    for (std::size_t i = factors.size() - 1; i-- > 0;) {
        DenseMatrix next;
        sparse_dense_mul(factors[i], prod, next);
        next.map() *= layer_scale;
        prod = std::move(next);
    }
    if (prod.rows() != y.rows() || prod.cols() != y.cols())
        throw DimensionMismatch("reconstruction_error: product shape does not match Y");
    const double denom = std::max(y.frobenius(), 1e-300);
    double num = 0.0;
    for (std::size_t k = 0; k < prod.data().size(); ++k) {
        const double dv = prod.data()[k] - y.data()[k];
        num += dv * dv;
    }
    return std::sqrt(num) / denom;
}

}  // namespace sparsefact
