#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/matrix.hpp"

// Gram step: G = d * Y * Y^T. The d undoes the 1/sqrt(d) our generator
// attaches to X_1, so for a depth-1 chain G equals X X^T exactly; for deeper
// chains the off-diagonal rounds to X_1 X_1^T whenever the accumulated
// deviation stays below 1/2 (the margin we record). The diagonal is kept
// unrounded and is never consulted by recovery.

namespace sparsefact {

// Margin at which rounding is flagged ambiguous (warning, never an error):
// far enough below 1/2 to fire before an entry can actually flip.
inline constexpr double kAmbiguousMargin = 0.45;

class GramGraph {
  public:
    GramGraph() : n_(0), margin_(0), ambiguous_(false) {}

    GramGraph(int n)
        : n_(n), weights_(static_cast<std::size_t>(n) * n, 0),
          diag_(static_cast<std::size_t>(n), 0.0), margin_(0), ambiguous_(false) {}

    int order() const { return n_; }

    std::int32_t weight(int i, int j) const {
        return weights_[static_cast<std::size_t>(i) * n_ + j];
    }
    void set_weight(int i, int j, std::int32_t w) {
        weights_[static_cast<std::size_t>(i) * n_ + j] = w;
        weights_[static_cast<std::size_t>(j) * n_ + i] = w;
    }

    double margin() const { return margin_; }
    bool ambiguous() const { return ambiguous_; }
    const std::vector<double>& diag() const { return diag_; }

    void set_margin(double m) {
        margin_ = m;
        ambiguous_ = m >= kAmbiguousMargin;
    }
    std::vector<double>& diag_mutable() { return diag_; }

    std::int64_t nnz_offdiag() const {
        std::int64_t c = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (i != j && weight(i, j) != 0) ++c;
        return c;
    }

    // Upper-triangle nonzeros as a sparse matrix (the SMF1 serialization).
    SparseIntMatrix upper() const {
        std::vector<Triplet> ts;
        for (int i = 0; i < n_; ++i)
            for (int j = i + 1; j < n_; ++j)
                if (weight(i, j) != 0) ts.push_back({i, j, weight(i, j)});
        return SparseIntMatrix::from_triplets(n_, n_, std::move(ts));
    }

    const std::vector<std::int32_t>& raw() const { return weights_; }

  private:
    int n_;
    std::vector<std::int32_t> weights_;
    std::vector<double> diag_;
    double margin_;
    bool ambiguous_;
};

inline GramGraph rounded_gram(const DenseMatrix& y, int d) {
    if (y.rows() != y.cols()) throw DimensionMismatch("rounded_gram: Y must be square");
    if (d < 1) throw Error("rounded_gram: d must be >= 1");
    if (!y.all_finite()) throw NonFinite("rounded_gram: Y contains non-finite values");
    const int n = y.rows();
    Eigen::MatrixXd g = static_cast<double>(d) * (y.map() * y.map().transpose());
    GramGraph out(n);
    double margin = 0.0;
    for (int i = 0; i < n; ++i) {
        out.diag_mutable()[static_cast<std::size_t>(i)] = g(i, i);
        for (int j = i + 1; j < n; ++j) {
            const double v = g(i, j);
            const double r = std::nearbyint(v);
            const double dist = std::abs(v - r);
            if (dist > margin) margin = dist;
            const auto w = static_cast<std::int32_t>(r);
            if (w != 0) out.set_weight(i, j, w);
        }
    }
    out.set_margin(margin);
    return out;
}

// Exact integer X X^T (off-diagonal) from a ground-truth factor, used by the
// margin report: accumulate column outer products.
inline std::vector<std::int64_t> exact_gram_offdiag(const SparseIntMatrix& x) {
    const int n = x.rows();
    std::vector<std::int64_t> g(static_cast<std::size_t>(n) * n, 0);
    for (int j = 0; j < x.cols(); ++j) {
        for (std::int64_t a = x.col_begin(j); a < x.col_end(j); ++a)
            for (std::int64_t b = x.col_begin(j); b < x.col_end(j); ++b) {
                const int ra = x.entry_row(a), rb = x.entry_row(b);
                g[static_cast<std::size_t>(ra) * n + rb] +=
                    static_cast<std::int64_t>(x.entry_value(a)) * x.entry_value(b);
            }
    }
    return g;
}

struct MarginReport {
    double max_deviation = 0.0;               // max |d(YY^T)_ij - (XX^T)_ij|, i != j
    std::vector<std::int64_t> histogram;      // 11 bins of width 0.05 over [0, 0.55+)
    std::int64_t rounding_disagreements = 0;  // entries where round() != truth
};

inline MarginReport gram_margin(const DenseMatrix& y, int d, const SparseIntMatrix& truth) {
    if (y.rows() != y.cols() || truth.rows() != y.rows() || truth.cols() != y.rows())
        throw DimensionMismatch("gram_margin: Y and truth must be square of equal order");
    const int n = y.rows();
    Eigen::MatrixXd g = static_cast<double>(d) * (y.map() * y.map().transpose());
    std::vector<std::int64_t> tg = exact_gram_offdiag(truth);
    MarginReport rep;
    rep.histogram.assign(11, 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dev =
                std::abs(g(i, j) - static_cast<double>(tg[static_cast<std::size_t>(i) * n + j]));
            if (dev > rep.max_deviation) rep.max_deviation = dev;
            const auto bin = static_cast<std::size_t>(std::min(dev / 0.05, 10.0));
            ++rep.histogram[bin];
            if (static_cast<std::int64_t>(std::nearbyint(g(i, j))) !=
                tg[static_cast<std::size_t>(i) * n + j])
                ++rep.rounding_disagreements;
        }
    return rep;
}

}  // namespace sparsefact
