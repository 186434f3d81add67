#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/genmodel.hpp"
#include "sparsefact/matrix.hpp"
#include "sparsefact/rng.hpp"

// Empirical diagnostics for the concentration behavior the analysis leans
// on: how sparsity and entry magnitudes grow as a sparse vector is pushed
// through the chain, how the Gram diagonal concentrates, and the
// cross-moment between two disjoint propagated vectors (exactly zero in
// expectation after one layer). Everything here reports; nothing asserts --
// the theory's constants are asymptotic and unspecified at desk scale.

namespace sparsefact {

struct MomentStats {
    int layer = 0;             // 0 = the input vector itself
    int nnz = 0;
    double max_abs = 0.0;
    double second_moment = 0.0;  // (1/n) sum q_i^2
    double fourth_moment = 0.0;  // (1/n) sum q_i^4
    double cross_moment = 0.0;   // (1/n) sum q_i w_i against the disjoint partner
};

// Plotting scale from the growth analysis: M = (c log n)^(log_d n) caps the
// propagated entries once the chain has mixed; below that depth the cap
// grows like (c log n)^l. c is an unspecified analysis constant; 2 is a
// scale for eyeballing, not a bound to test.
struct TheoryScale {
    double M = 1.0;
    double c = 2.0;

    static TheoryScale for_params(int n, int d, double c = 2.0) {
        TheoryScale t;
        t.c = c;
        const double cl = std::max(1.0, c * std::log(static_cast<double>(n)));
        t.M = d > 1 ? std::pow(cl, std::log(static_cast<double>(n)) /
                                       std::log(static_cast<double>(d)))
                    : cl;
        return t;
    }

    double layer_bound(int n, int layer) const {
        const double cl = std::max(1.0, c * std::log(static_cast<double>(n)));
        return std::min(std::pow(cl, static_cast<double>(layer)), M * std::sqrt(cl));
    }
};

// q_l = u Z_1 ... Z_l (1/sqrt(d))^l for a sparse integer row vector u.
inline std::vector<double> propagate_vector(const std::vector<std::pair<int, std::int32_t>>& u,
                                            int n, const std::vector<SparseIntMatrix>& zs, int d) {
    if (d < 1) throw Error("propagate_vector: d must be >= 1");
    std::vector<double> q(static_cast<std::size_t>(n), 0.0);
    for (const auto& [row, val] : u) {
        if (row < 0 || row >= n) throw DimensionMismatch("propagate_vector: u index out of range");
        q[static_cast<std::size_t>(row)] += val;
    }
    const double isd = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> next;
    for (const auto& z : zs) {
        if (z.rows() != n || z.cols() != n)
            throw DimensionMismatch("propagate_vector: factor order != n");
        next.assign(static_cast<std::size_t>(n), 0.0);
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::int64_t e = z.col_begin(j); e < z.col_end(j); ++e)
                acc += q[static_cast<std::size_t>(z.entry_row(e))] * z.entry_value(e);
            next[static_cast<std::size_t>(j)] = acc * isd;
        }
        q = next;
    }
    return q;
}

struct CrossMomentEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
    std::int64_t samples = 0;
};

struct LayerAggregate {
    int layer = 0;
    double nnz_mean = 0.0;
    int nnz_max = 0;
    double maxabs_mean = 0.0;
    double maxabs_max = 0.0;
    double m2 = 0.0;   // mean over trials of the per-trial second moment
    double m4 = 0.0;
    double cross = 0.0;  // cross-moment estimate at this layer
    double cross_se = 0.0;
    double bound_M_scale = 0.0;
};

namespace diag_detail {

inline bool supports_disjoint(const std::vector<std::pair<int, std::int32_t>>& a,
                              const std::vector<std::pair<int, std::int32_t>>& b) {
    // both are sorted by row
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first == b[j].first) return false;
        if (a[i].first < b[j].first)
            ++i;
        else
            ++j;
    }
    return true;
}

// Deterministic trial substreams: trial t draws its chain, its u, and its
// v (re-drawn until support-disjoint from u) from fixed substream lanes.
struct TrialDraw {
    std::vector<SparseIntMatrix> chain;
    std::vector<std::pair<int, std::int32_t>> u;
    std::vector<std::pair<int, std::int32_t>> v;
};

inline TrialDraw draw_trial(const ModelParams& p, std::uint64_t trial, bool with_v) {
    TrialDraw out;
    ModelParams chain_params = p;
    chain_params.master_seed = substream_seed(p.master_seed, 3 * trial + 1, 0);
    out.chain = gen_factor_chain(chain_params);
    out.u = gen_sparse_column(p.n, p.d, substream_seed(p.master_seed, 3 * trial + 2, 0));
    if (with_v) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            if (attempt >= 10000)
                throw Error("diagnostics: could not draw a support-disjoint partner (d too "
                            "close to n?)");
            out.v = gen_sparse_column(p.n, p.d, substream_seed(p.master_seed, 3 * trial + 3, attempt));
            if (supports_disjoint(out.u, out.v)) break;
        }
    }
    return out;
}

struct RunningCross {
    double sum = 0.0;
    std::vector<double> samples;  // per-coordinate products, trial-major
};

}  // namespace diag_detail

// One deterministic pass computing the per-layer profile: sparsity/entry
// growth for the propagated u, and at every depth the cross-moment of the
// disjoint pair (u, v). Layer 0 is the input vector itself.
inline std::vector<LayerAggregate> entry_growth_profile(const ModelParams& p, int trials) {
    p.validate();
    if (trials < 1) throw Error("entry_growth_profile: trials must be >= 1");
    const int layers = p.s + 1;  // including layer 0
    std::vector<LayerAggregate> agg(static_cast<std::size_t>(layers));
    std::vector<diag_detail::RunningCross> cross(static_cast<std::size_t>(layers));
    const TheoryScale scale = TheoryScale::for_params(p.n, p.d);
    for (int l = 0; l < layers; ++l) {
        agg[static_cast<std::size_t>(l)].layer = l;
        agg[static_cast<std::size_t>(l)].bound_M_scale = scale.layer_bound(p.n, l);
        cross[static_cast<std::size_t>(l)].samples.reserve(
            static_cast<std::size_t>(trials) * p.n);
    }

    const double isd = 1.0 / std::sqrt(static_cast<double>(p.d));
    std::vector<double> q(static_cast<std::size_t>(p.n)), w(static_cast<std::size_t>(p.n));
    std::vector<double> qn, wn;
    for (int t = 0; t < trials; ++t) {
        auto draw = diag_detail::draw_trial(p, static_cast<std::uint64_t>(t), true);
        std::fill(q.begin(), q.end(), 0.0);
        std::fill(w.begin(), w.end(), 0.0);
        for (const auto& [row, val] : draw.u) q[static_cast<std::size_t>(row)] += val;
        for (const auto& [row, val] : draw.v) w[static_cast<std::size_t>(row)] += val;
        for (int l = 0; l < layers; ++l) {
            if (l > 0) {
                const auto& z = draw.chain[static_cast<std::size_t>(l - 1)];
                qn.assign(static_cast<std::size_t>(p.n), 0.0);
                wn.assign(static_cast<std::size_t>(p.n), 0.0);
                for (int j = 0; j < p.n; ++j) {
                    double aq = 0.0, aw = 0.0;
                    for (std::int64_t e = z.col_begin(j); e < z.col_end(j); ++e) {
                        aq += q[static_cast<std::size_t>(z.entry_row(e))] * z.entry_value(e);
                        aw += w[static_cast<std::size_t>(z.entry_row(e))] * z.entry_value(e);
                    }
                    qn[static_cast<std::size_t>(j)] = aq * isd;
                    wn[static_cast<std::size_t>(j)] = aw * isd;
                }
                q = qn;
                w = wn;
            }
            LayerAggregate& a = agg[static_cast<std::size_t>(l)];
            int nnz = 0;
            double mx = 0.0, s2 = 0.0, s4 = 0.0;
            for (int i = 0; i < p.n; ++i) {
                const double v = q[static_cast<std::size_t>(i)];
                if (v != 0.0) ++nnz;
                mx = std::max(mx, std::abs(v));
                s2 += v * v;
                s4 += v * v * v * v;
            }
            a.nnz_mean += nnz;
            a.nnz_max = std::max(a.nnz_max, nnz);
            a.maxabs_mean += mx;
            a.maxabs_max = std::max(a.maxabs_max, mx);
            a.m2 += s2 / p.n;
            a.m4 += s4 / p.n;
            auto& rc = cross[static_cast<std::size_t>(l)];
            for (int i = 0; i < p.n; ++i) {
                const double prod = q[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
                rc.sum += prod;
                rc.samples.push_back(prod);
            }
        }
    }

    for (int l = 0; l < layers; ++l) {
        LayerAggregate& a = agg[static_cast<std::size_t>(l)];
        a.nnz_mean /= trials;
        a.maxabs_mean /= trials;
        a.m2 /= trials;
        a.m4 /= trials;
        const auto& rc = cross[static_cast<std::size_t>(l)];
        const std::int64_t nsamp = static_cast<std::int64_t>(rc.samples.size());
        const double mean = rc.sum / static_cast<double>(nsamp);
        a.cross = mean;
        if (nsamp > 1) {
            double ss = 0.0;
            for (double x : rc.samples) ss += (x - mean) * (x - mean);
            a.cross_se = std::sqrt(ss / static_cast<double>(nsamp - 1)) /
                         std::sqrt(static_cast<double>(nsamp));
        }
    }
    return agg;
}

// The final-depth cross-moment with its standard error; the l = 1 disjoint
// case is the one claim that is exactly zero in expectation at finite n.
inline CrossMomentEstimate cross_correlation_estimate(const ModelParams& p, int trials) {
    auto agg = entry_growth_profile(p, trials);
    CrossMomentEstimate out;
    out.estimate = agg.back().cross;
    out.standard_error = agg.back().cross_se;
    out.samples = static_cast<std::int64_t>(trials) * p.n;
    return out;
}

struct DiagonalStats {
    std::int64_t rows_used = 0;
    std::int64_t skipped_zero_rows = 0;
    double mean_ratio = 0.0;
    double max_abs_deviation = 0.0;  // max |ratio - 1|
};

// d (Y Y^T)_ii / ||row_i(X_1)||^2 concentrates at 1; exactly 1 at s = 1.
// Rows of X_1 that cancelled to zero are skipped and counted.
inline DiagonalStats diagonal_concentration(const ModelParams& p, int trials) {
    p.validate();
    if (trials < 1) throw Error("diagonal_concentration: trials must be >= 1");
    DiagonalStats out;
    double sum_ratio = 0.0;
    for (int t = 0; t < trials; ++t) {
        ModelParams cp = p;
        cp.master_seed = substream_seed(p.master_seed, static_cast<std::uint64_t>(t) + 1, 0);
        auto chain = gen_factor_chain(cp);
        DenseMatrix y = forward_product(chain, p.d);
        std::vector<double> row_norm2(static_cast<std::size_t>(p.n), 0.0);
        const auto& x1 = chain.front();
        for (int j = 0; j < p.n; ++j)
            for (std::int64_t e = x1.col_begin(j); e < x1.col_end(j); ++e) {
                const double v = x1.entry_value(e);
                row_norm2[static_cast<std::size_t>(x1.entry_row(e))] += v * v;
            }
        for (int i = 0; i < p.n; ++i) {
            if (row_norm2[static_cast<std::size_t>(i)] == 0.0) {
                ++out.skipped_zero_rows;
                continue;
            }
            double yrow2 = 0.0;
            for (int j = 0; j < p.n; ++j) {
                const double v = y.map()(i, j);
                yrow2 += v * v;
            }
            const double ratio = p.d * yrow2 / row_norm2[static_cast<std::size_t>(i)];
            sum_ratio += ratio;
            out.max_abs_deviation = std::max(out.max_abs_deviation, std::abs(ratio - 1.0));
            ++out.rows_used;
        }
    }
    if (out.rows_used > 0) out.mean_ratio = sum_ratio / static_cast<double>(out.rows_used);
    return out;
}

}  // namespace sparsefact
