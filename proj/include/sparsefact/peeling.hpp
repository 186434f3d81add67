#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "sparsefact/common.hpp"
#include "sparsefact/equiv.hpp"
#include "sparsefact/genmodel.hpp"
#include "sparsefact/gram.hpp"
#include "sparsefact/matrix.hpp"
#include "sparsefact/recovery.hpp"
#include "sparsefact/rng.hpp"

// Layer peeling: once X_1 is recovered, (X_1/sqrt(d)) Y' = Y exposes the
// product of the deeper factors, and the process repeats. The last factor
// needs no correlation graph at all -- the remaining matrix IS the scaled
// factor, so it is recovered by direct rounding.

namespace sparsefact {

struct LayerSolveResult {
    DenseMatrix peeled;          // the remaining product Y'
    double residual = 0.0;       // ||(Xhat/sqrt(d)) Y' - Y||_F / ||Y||_F
    double cond_estimate = 1.0;  // sigma_max / sigma_min
};

enum class LayerStatus {
    ok = 0,
    ambiguous_rounding = 1,
    incomplete_recovery = 3,  // enum values double as severity ranks
    ill_conditioned = 2,
};

inline const char* to_string(LayerStatus s) {
    switch (s) {
        case LayerStatus::ok: return "ok";
        case LayerStatus::ambiguous_rounding: return "ambiguous_rounding";
        case LayerStatus::incomplete_recovery: return "incomplete_recovery";
        case LayerStatus::ill_conditioned: return "ill_conditioned";
    }
    return "unknown";
}

inline int severity(LayerStatus s) { return static_cast<int>(s); }

struct LayerReport {
    int index = 0;  // 1-based layer number
    double margin = 0.0;
    std::size_t candidate_count = 0;
    std::optional<double> residual;       // solve residual; rounding residual on the last layer
    std::optional<double> cond_estimate;  // absent where no solve happened
    LayerStatus status = LayerStatus::ok;
};

struct FactorizationReport {
    std::vector<LayerReport> layers;
    std::optional<double> reconstruction_error;  // absent when the chain aborted early
    double elapsed_ms = 0.0;

    LayerStatus overall() const {
        LayerStatus worst = LayerStatus::ok;
        for (const auto& l : layers)
            if (severity(l.status) > severity(worst)) worst = l.status;
        return worst;
    }
    bool all_ok() const { return overall() == LayerStatus::ok; }
};

struct ChainResult {
    std::vector<SparseIntMatrix> factors;
    FactorizationReport report;
};

namespace peel_detail {

// Largest/smallest singular value by 100-step power iteration on A^T A and
// its inverse (through the LU solves). Chosen over a norm estimator for its
// simplicity; 100 steps is far past convergence at the condition numbers we
// accept, and the estimate is only compared against kappa_max.
inline std::pair<double, double> extreme_singular_values(
    const Eigen::MatrixXd& a, const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, int iters = 100) {
    const int n = static_cast<int>(a.rows());
    SplitMix64 rng(0x5eedf00dcafe1234ull);
    Eigen::VectorXd v(n), w(n);
    for (int i = 0; i < n; ++i) {
        v[i] = rng.next_sym();
        w[i] = rng.next_sym();
    }
    v.normalize();
    w.normalize();
    double smax = 0.0, smin_inv = 0.0;
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd av = a * v;
        v = a.transpose() * av;
        const double nv = v.norm();
        if (nv == 0.0) break;  // v fell in the kernel; smax keeps its last value
        smax = std::sqrt(nv);  // ||A^T A v|| -> lambda_max, sigma = sqrt(lambda)
        v /= nv;
    }
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd t = lu.adjoint().solve(w);  // A^-T w
        w = lu.solve(t);                            // (A^T A)^-1 w
        const double nw = w.norm();
        if (!std::isfinite(nw) || nw == 0.0) return {smax, 0.0};
        smin_inv = std::sqrt(nw);
        w /= nw;
    }
    const double smin = smin_inv > 0.0 ? 1.0 / smin_inv : 0.0;
    return {smax, smin};
}

}  // namespace peel_detail

inline LayerSolveResult solve_layer(const SparseIntMatrix& xhat, const DenseMatrix& y, int d,
                                    double kappa_max = 1e8) {
    if (xhat.rows() != xhat.cols()) throw DimensionMismatch("solve_layer: Xhat must be square");
    if (xhat.rows() != y.rows()) throw DimensionMismatch("solve_layer: Xhat and Y orders differ");
    if (d < 1) throw Error("solve_layer: d must be >= 1");
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const Eigen::MatrixXd a = xhat.to_dense() * scale;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() == 0.0)
        throw Singular("solve_layer: exactly zero pivot; Xhat is singular");

    LayerSolveResult out;
    Eigen::MatrixXd yp = lu.solve(y.map());
    const double ynorm = std::max(y.frobenius(), 1e-300);
    out.residual = (a * yp - y.map()).norm() / ynorm;
    const auto [smax, smin] = peel_detail::extreme_singular_values(a, lu);
    out.cond_estimate = smin > 0.0 ? smax / smin
                                   : std::numeric_limits<double>::infinity();
    if (out.cond_estimate < 1.0) out.cond_estimate = 1.0;  // estimator noise floor
    out.peeled = DenseMatrix::from_eigen(yp);
    if (out.cond_estimate > kappa_max || out.residual > 1e-6)
        throw IllConditioned(out.cond_estimate,
                             "solve_layer: cond " + std::to_string(out.cond_estimate) +
                                 ", residual " + std::to_string(out.residual));
    return out;
}

// Round sqrt(d) * Y_remaining entrywise to the final integer factor.
// Returns the factor plus the rounding margin and relative rounding residual.
inline std::tuple<SparseIntMatrix, double, double> round_final_layer(const DenseMatrix& y, int d) {
    const double sd = std::sqrt(static_cast<double>(d));
    double margin = 0.0;
    double num = 0.0, den = 0.0;
    std::vector<Triplet> ts;
    for (int i = 0; i < y.rows(); ++i)
        for (int j = 0; j < y.cols(); ++j) {
            const double v = y.map()(i, j) * sd;
            if (!std::isfinite(v)) throw NonFinite("round_final_layer: non-finite entry");
            const double r = std::nearbyint(v);
            if (std::abs(r) > 2147483647.0) throw Error("round_final_layer: entry overflows int32");
            margin = std::max(margin, std::abs(v - r));
            num += (v - r) * (v - r);
            den += v * v;
            if (r != 0.0) ts.push_back({i, j, static_cast<std::int32_t>(r)});
        }
    const double resid = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    return {SparseIntMatrix::from_triplets(y.rows(), y.cols(), std::move(ts)), margin, resid};
}

// Full chain: for layers 1..s-1, round the Gram, recover the factor from the
// correlation graph, and solve to peel; the final layer is rounded directly.
// Layer failures are recorded in the report with their layer index and stop
// the peel (nothing downstream is computable without it); everything
// recovered up to that point is still returned.
inline ChainResult factorize_chain(const DenseMatrix& y, int n, int d, int s,
                                   RecoveryConfig cfg = {}, double kappa_max = 1e8) {
    if (y.rows() != n || y.cols() != n)
        throw DimensionMismatch("factorize_chain: Y must be n x n");
    if (s < 1) throw Error("factorize_chain: s must be >= 1");
    if (d < 1) throw Error("factorize_chain: d must be >= 1");
    cfg.d = d;

    const auto t0 = std::chrono::steady_clock::now();
    ChainResult res;
    DenseMatrix cur = y;
    bool aborted = false;

    for (int layer = 1; layer < s && !aborted; ++layer) {
        GramGraph g = rounded_gram(cur, d);
        LayerReport lr;
        lr.index = layer;
        lr.margin = g.margin();
        lr.status = g.ambiguous() ? LayerStatus::ambiguous_rounding : LayerStatus::ok;
        try {
            RecoveredFactor rec = recover_factor(g, n, cfg);
            lr.candidate_count = rec.candidate_count;
            LayerSolveResult ls = solve_layer(rec.factor, cur, d, kappa_max);
            lr.residual = ls.residual;
            lr.cond_estimate = ls.cond_estimate;
            res.factors.push_back(std::move(rec.factor));
            cur = std::move(ls.peeled);
        } catch (const IncompleteRecovery& e) {
            lr.candidate_count = e.candidate_count;
            lr.status = LayerStatus::incomplete_recovery;
            aborted = true;
        } catch (const IllConditioned& e) {
            lr.cond_estimate = e.cond_estimate;
            lr.status = LayerStatus::ill_conditioned;
            aborted = true;
        } catch (const Singular&) {
            lr.status = LayerStatus::ill_conditioned;
            aborted = true;
        }
        res.report.layers.push_back(std::move(lr));
    }

    if (!aborted) {
        auto [xs, margin, resid] = round_final_layer(cur, d);
        LayerReport lr;
        lr.index = s;
        lr.margin = margin;
        lr.residual = resid;
        lr.status = margin >= kAmbiguousMargin ? LayerStatus::ambiguous_rounding : LayerStatus::ok;
        res.factors.push_back(std::move(xs));
        res.report.layers.push_back(std::move(lr));
        res.report.reconstruction_error =
            reconstruction_error(res.factors, 1.0 / std::sqrt(static_cast<double>(d)), y);
    }

    res.report.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace sparsefact
