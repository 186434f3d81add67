#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sparsefact/common.hpp"
#include "sparsefact/gram.hpp"
#include "sparsefact/matrix.hpp"

// Support recovery from the correlation graph. The per-candidate machinery
// follows the clustering algorithm directly: join an edge (i, j), take
// common neighbors, prune by adjacency fraction tau (one drop pass, one add
// pass), then read signs and magnitudes off the edge weights by majority.
//
// Assembling a full factor out of those candidates is done iteratively:
// accept candidates that several edges agree on, subtract their outer
// product from a residual copy of the graph, and re-enumerate on the thinner
// residual, where pruning is much more reliable. A repair loop rolls back
// accepted columns that touch whatever residual refuses to clear and retries
// with a stricter tau. Success is certified by construction: we return a
// factor only when exactly n columns were accepted and the residual is
// identically zero, i.e. the output provably reproduces the entire
// off-diagonal correlation structure. Anything less raises
// IncompleteRecovery -- never a silently wrong matrix.

namespace sparsefact {

struct RecoveryConfig {
    double tau = 0.5;                // adjacency fraction for prune passes
    double min_support_factor = 0.25;  // discard candidates below this * d
    int d = 0;                       // sparsity parameter of the instance

    // Iterative-assembly controls (defaults validated at desk scale).
    int min_multiplicity = 2;        // edges that must agree before acceptance
    double repair_saturation = 0.5;  // fraction of internal edges that must agree in repair
    int max_repair_rounds = 12;
    double tau_step = 0.1;           // escalation when the residual stalls
    double tau_max = 0.9;
    int max_drain_rounds = 100;
};

struct CandidateColumn {
    std::pair<int, int> pair;              // identifying edge
    std::vector<int> support;              // ascending node indices
    std::vector<std::int8_t> sign;         // aligned with support; sign[min] = +1
    std::vector<std::int32_t> magnitude;   // aligned with support; >= 1

    std::vector<std::pair<int, std::int32_t>> entries() const {
        std::vector<std::pair<int, std::int32_t>> out;
        out.reserve(support.size());
        for (std::size_t k = 0; k < support.size(); ++k)
            out.emplace_back(support[k], static_cast<std::int32_t>(sign[k]) * magnitude[k]);
        return out;
    }
};

namespace detail {

// Canonical signed column: (row, value) pairs ascending by row, oriented so
// the first value is positive. This is both the dedupe key and the column
// sort key of the assembled factor.
using Triple = std::vector<std::pair<int, std::int32_t>>;

inline void canonicalize(Triple& t) {
    if (!t.empty() && t.front().second < 0)
        for (auto& [r, v] : t) v = -v;
}

// "support first, then values" ordering
struct TripleLess {
    bool operator()(const Triple& a, const Triple& b) const {
        const std::size_t m = std::min(a.size(), b.size());
        for (std::size_t k = 0; k < m; ++k)
            if (a[k].first != b[k].first) return a[k].first < b[k].first;
        if (a.size() != b.size()) return a.size() < b.size();
        for (std::size_t k = 0; k < m; ++k)
            if (a[k].second != b[k].second) return a[k].second < b[k].second;
        return false;
    }
};

// Flat bitset rows over n nodes; adjacency of the (residual) graph.
class BitRows {
  public:
    BitRows(int n) : n_(n), words_((n + 63) / 64), bits_(static_cast<std::size_t>(n) * words_, 0) {}

    void set(int i, int j) { bits_[static_cast<std::size_t>(i) * words_ + j / 64] |= 1ull << (j % 64); }
    bool test(int i, int j) const {
        return (bits_[static_cast<std::size_t>(i) * words_ + j / 64] >> (j % 64)) & 1u;
    }
    const std::uint64_t* row(int i) const { return bits_.data() + static_cast<std::size_t>(i) * words_; }
    int words() const { return words_; }
    int order() const { return n_; }

  private:
    int n_;
    int words_;
    std::vector<std::uint64_t> bits_;
};

inline int popcount_and(const std::uint64_t* a, const std::uint64_t* b, int words) {
    int c = 0;
    for (int w = 0; w < words; ++w) c += __builtin_popcountll(a[w] & b[w]);
    return c;
}

// Weight view: n and a dense symmetric int32 array with zero diagonal.
struct WeightView {
    int n;
    const std::int32_t* w;
    std::int32_t operator()(int i, int j) const {
        return w[static_cast<std::size_t>(i) * n + j];
    }
};

inline BitRows adjacency(const WeightView& wv) {
    BitRows adj(wv.n);
    for (int i = 0; i < wv.n; ++i)
        for (int j = 0; j < wv.n; ++j)
            if (i != j && wv(i, j) != 0) adj.set(i, j);
    return adj;
}

// One drop pass then one add pass, thresholded on the adjacency fraction.
// An empty kept set stays empty: with nothing to be adjacent to, the add
// rule would otherwise readmit every node vacuously.
inline std::vector<int> prune_pass(const BitRows& adj, const std::vector<int>& S, double tau) {
    const int m = static_cast<int>(S.size());
    if (m < 2) return {};
    std::vector<std::uint64_t> mask(static_cast<std::size_t>(adj.words()), 0);
    for (int k : S) mask[k / 64] |= 1ull << (k % 64);
    std::vector<int> kept;
    for (int k : S) {
        const int deg = popcount_and(adj.row(k), mask.data(), adj.words());
        if (static_cast<double>(deg) >= tau * (m - 1)) kept.push_back(k);
    }
    if (kept.empty()) return {};
    std::vector<std::uint64_t> kmask(static_cast<std::size_t>(adj.words()), 0);
    for (int k : kept) kmask[k / 64] |= 1ull << (k % 64);
    std::vector<int> out;
    const double need = tau * static_cast<double>(kept.size());
    for (int k = 0; k < adj.order(); ++k) {
        const bool in_kept = (kmask[k / 64] >> (k % 64)) & 1u;
        if (in_kept) {
            out.push_back(k);
            continue;
        }
        const int cnt = popcount_and(adj.row(k), kmask.data(), adj.words());
        if (static_cast<double>(cnt) >= need) out.push_back(k);
    }
    return out;
}

// Sign assignment: anchor at the minimum index, propagate the anchor's edge
// signs, then run one weighted-majority correction sweep over the initial
// signs. Ties keep the current sign; too many ties marks the candidate bad.
inline std::optional<std::vector<std::int8_t>> sign_pass(const WeightView& wv,
                                                         const std::vector<int>& S,
                                                         std::size_t* zero_ties = nullptr) {
    const std::size_t m = S.size();
    const int a = S.front();
    std::vector<std::int8_t> sign(m, 1);
    for (std::size_t k = 1; k < m; ++k) {
        const std::int32_t w = wv(a, S[k]);
        if (w != 0) sign[k] = w > 0 ? 1 : -1;
    }
    std::vector<std::int8_t> corrected(m, 1);
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < m; ++k) {
        int tot = 0;
        for (std::size_t k2 = 0; k2 < m; ++k2) {
            if (k2 == k) continue;
            const std::int32_t w = wv(S[k], S[k2]);
            if (w == 0) continue;
            tot += sign[k2] * (w > 0 ? 1 : -1);
        }
        if (tot == 0) {
            ++zeros;
            corrected[k] = sign[k];
        } else {
            corrected[k] = tot > 0 ? 1 : -1;
        }
    }
    if (zero_ties) *zero_ties = zeros;
    if (static_cast<double>(zeros) > 0.10 * static_cast<double>(m)) return std::nullopt;
    if (corrected.front() < 0)
        for (auto& s : corrected) s = -s;
    return corrected;
}

// Magnitude assignment: per node, the mode of sign(k) sign(k') w(k,k') over
// weighted neighbors in S, ties broken toward the smallest value.
inline std::optional<std::vector<std::int32_t>> magnitude_pass(
    const WeightView& wv, const std::vector<int>& S, const std::vector<std::int8_t>& sign) {
    const std::size_t m = S.size();
    std::vector<std::int32_t> mag(m, 0);
    std::map<std::int32_t, int> counts;
    for (std::size_t k = 0; k < m; ++k) {
        counts.clear();
        for (std::size_t k2 = 0; k2 < m; ++k2) {
            if (k2 == k) continue;
            const std::int32_t w = wv(S[k], S[k2]);
            if (w == 0) continue;
            ++counts[static_cast<std::int32_t>(sign[k]) * sign[k2] * w];
        }
        if (counts.empty()) return std::nullopt;
        std::int32_t best = 0;
        int best_count = 0;
        for (const auto& [value, count] : counts)
            if (count > best_count) {  // ascending keys: ties keep the smallest
                best = value;
                best_count = count;
            }
        if (best <= 0) return std::nullopt;
        mag[k] = best;
    }
    return mag;
}

}  // namespace detail

// --- public per-candidate operations --------------------------------------

inline std::vector<int> common_neighbors(const GramGraph& g, int i, int j) {
    if (i == j || g.weight(i, j) == 0)
        throw NoEdge("common_neighbors: nodes " + std::to_string(i) + "," + std::to_string(j) +
                     " share no edge");
    std::vector<int> s;
    for (int k = 0; k < g.order(); ++k) {
        if (k == i || k == j) continue;
        if (g.weight(i, k) != 0 && g.weight(j, k) != 0) s.push_back(k);
    }
    s.push_back(i);
    s.push_back(j);
    std::sort(s.begin(), s.end());
    return s;
}

inline std::vector<int> prune_candidate(const GramGraph& g, const std::vector<int>& s,
                                        const RecoveryConfig& cfg) {
    detail::WeightView wv{g.order(), g.raw().data()};
    return detail::prune_pass(detail::adjacency(wv), s, cfg.tau);
}

inline std::vector<std::int8_t> assign_signs(const GramGraph& g, const std::vector<int>& s) {
    if (s.size() < 2) throw Error("assign_signs: support must have >= 2 nodes");
    detail::WeightView wv{g.order(), g.raw().data()};
    std::size_t zeros = 0;
    auto out = detail::sign_pass(wv, s, &zeros);
    if (!out)
        throw Inconsistent("assign_signs: " + std::to_string(zeros) + " zero-majority nodes in a support of " +
                           std::to_string(s.size()));
    return *out;
}

inline std::vector<std::int32_t> assign_magnitudes(const GramGraph& g, const std::vector<int>& s,
                                                   const std::vector<std::int8_t>& sign) {
    detail::WeightView wv{g.order(), g.raw().data()};
    auto out = detail::magnitude_pass(wv, s, sign);
    if (!out) throw NonPositiveMode("assign_magnitudes: non-positive or empty majority value");
    return *out;
}

struct CandidateDiag {
    std::pair<int, int> pair;
    int support_size;
    std::string dropped_reason;  // empty when the candidate survived
};

// Literal single-shot enumeration: every edge contributes one candidate
// attempt; survivors are deduped on the full (support, sign, magnitude)
// triple. How many survive depends strongly on graph density; callers that
// need a complete factor should use recover_factor instead.
inline std::vector<CandidateColumn> enumerate_candidates(const GramGraph& g,
                                                         const RecoveryConfig& cfg,
                                                         std::vector<CandidateDiag>* diag = nullptr) {
    detail::WeightView wv{g.order(), g.raw().data()};
    detail::BitRows adj = detail::adjacency(wv);
    std::set<detail::Triple, detail::TripleLess> seen;
    std::vector<CandidateColumn> out;
    const int n = g.order();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (g.weight(i, j) == 0) continue;
            std::vector<int> s;
            for (int k = 0; k < n; ++k)
                if (k == i || k == j || (adj.test(i, k) && adj.test(j, k))) s.push_back(k);
            std::vector<int> pruned = detail::prune_pass(adj, s, cfg.tau);
            const auto record = [&](const char* reason) {
                if (diag) diag->push_back({{i, j}, static_cast<int>(pruned.size()), reason});
            };
            if (static_cast<double>(pruned.size()) < cfg.min_support_factor * cfg.d) {
                record("support_below_d4");
                continue;
            }
            auto sign = detail::sign_pass(wv, pruned);
            if (!sign) {
                record("inconsistent_signs");
                continue;
            }
            auto mag = detail::magnitude_pass(wv, pruned, *sign);
            if (!mag) {
                record("non_positive_mode");
                continue;
            }
            detail::Triple t;
            for (std::size_t k = 0; k < pruned.size(); ++k)
                t.emplace_back(pruned[k], static_cast<std::int32_t>((*sign)[k]) * (*mag)[k]);
            detail::canonicalize(t);
            if (!seen.insert(t).second) {
                record("duplicate");
                continue;
            }
            record("");
            CandidateColumn c;
            c.pair = {i, j};
            c.support = pruned;
            c.sign = *sign;
            c.magnitude = *mag;
            out.push_back(std::move(c));
        }
    return out;
}

namespace detail {

// Residual workbench for the iterative assembly.
class Residual {
  public:
    Residual(const GramGraph& g) : n_(g.order()), w_(g.raw()) {}

    WeightView view() const { return {n_, w_.data()}; }
    int order() const { return n_; }

    void subtract(const Triple& t) { apply(t, -1); }
    void add_back(const Triple& t) { apply(t, +1); }

    std::int64_t nnz() const {
        std::int64_t c = 0;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (i != j && w_[static_cast<std::size_t>(i) * n_ + j] != 0) ++c;
        return c;
    }

    std::vector<int> active_nodes() const {
        std::vector<int> nodes;
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                if (i != j && w_[static_cast<std::size_t>(i) * n_ + j] != 0) {
                    nodes.push_back(i);
                    break;
                }
        return nodes;
    }

    int edges_within(const Triple& t) const {
        int c = 0;
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = a + 1; b < t.size(); ++b)
                if (w_[static_cast<std::size_t>(t[a].first) * n_ + t[b].first] != 0) ++c;
        return c;
    }

  private:
    void apply(const Triple& t, std::int32_t dir) {
        for (std::size_t a = 0; a < t.size(); ++a)
            for (std::size_t b = 0; b < t.size(); ++b) {
                if (a == b) continue;
                w_[static_cast<std::size_t>(t[a].first) * n_ + t[b].first] +=
                    dir * t[a].second * t[b].second;
            }
    }

    int n_;
    std::vector<std::int32_t> w_;
};

// One enumerate/tally/accept sweep repeated until nothing clears the bar.
// saturation = 0 is the permissive bulk mode; the repair loop passes the
// configured fraction so acceptance also requires agreement from that share
// of the candidate's internal residual edges.
inline void drain(Residual& r, const RecoveryConfig& cfg, double tau, double saturation,
                  std::vector<Triple>& accepted) {
    const int n = r.order();
    const double min_size = std::max(2.0, cfg.min_support_factor * cfg.d);
    for (int round = 0; round < cfg.max_drain_rounds; ++round) {
        const WeightView wv = r.view();
        BitRows adj = adjacency(wv);
        std::map<Triple, int, TripleLess> tally;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (wv(i, j) == 0) continue;
                std::vector<int> s;
                for (int k = 0; k < n; ++k)
                    if (k == i || k == j || (adj.test(i, k) && adj.test(j, k))) s.push_back(k);
                std::vector<int> pruned = prune_pass(adj, s, tau);
                if (static_cast<double>(pruned.size()) < min_size ||
                    static_cast<int>(pruned.size()) > cfg.d)
                    continue;
                auto sign = sign_pass(wv, pruned);
                if (!sign) continue;
                auto mag = magnitude_pass(wv, pruned, *sign);
                if (!mag) continue;
                // generator invariants: a real column never sums past d and
                // keeps the parity of d (each of the d spikes flips it once)
                std::int64_t total = 0;
                for (std::int32_t v : *mag) total += v;
                if (total > cfg.d || (static_cast<std::int64_t>(cfg.d) - total) % 2 != 0) continue;
                Triple t;
                for (std::size_t k = 0; k < pruned.size(); ++k)
                    t.emplace_back(pruned[k], static_cast<std::int32_t>((*sign)[k]) * (*mag)[k]);
                canonicalize(t);
                ++tally[t];
            }
        std::vector<Triple> newly;
        for (const auto& [t, count] : tally) {
            if (count < cfg.min_multiplicity) continue;
            if (saturation > 0.0 &&
                static_cast<double>(count) < saturation * r.edges_within(t))
                continue;
            newly.push_back(t);
        }
        if (newly.empty()) return;
        for (const Triple& t : newly) {
            r.subtract(t);
            accepted.push_back(t);
        }
    }
}

}  // namespace detail

struct RecoveredFactor {
    SparseIntMatrix factor;
    std::size_t candidate_count = 0;
    int repair_rounds = 0;
};

inline RecoveredFactor recover_factor(const GramGraph& g, int n, const RecoveryConfig& cfg) {
    if (g.order() != n) throw DimensionMismatch("recover_factor: graph order != n");
    if (cfg.d < 8)
        throw Unsupported("recover_factor: d = " + std::to_string(cfg.d) +
                          " unsupported; fraction thresholds and majority votes need d >= 8");
    // Any true Gram X X^T carries at most sum_g |supp_g|^2 <= n d^2 nonzero
    // cells, so a denser graph cannot be a correlation structure we could
    // ever explain -- bail before burning time on it.
    const std::int64_t budget =
        static_cast<std::int64_t>(n) * static_cast<std::int64_t>(cfg.d) * cfg.d;
    if (g.nnz_offdiag() > budget)
        throw IncompleteRecovery(
            0, "recover_factor: off-diagonal density exceeds the n*d^2 bound of a valid "
               "correlation graph (rounding was likely ambiguous)");

    detail::Residual r(g);
    std::vector<detail::Triple> accepted;
    detail::drain(r, cfg, cfg.tau, 0.0, accepted);

    double tau_r = cfg.tau;
    std::int64_t prev_resid = -1;
    int repairs = 0;
    while (r.nnz() != 0 && repairs < cfg.max_repair_rounds) {
        ++repairs;
        const std::int64_t resid_now = r.nnz();
        if (prev_resid >= 0 && resid_now >= prev_resid)
            tau_r = std::min(tau_r + cfg.tau_step, cfg.tau_max);
        prev_resid = resid_now;
        const std::vector<int> active = r.active_nodes();
        std::vector<bool> is_active(static_cast<std::size_t>(n), false);
        for (int a : active) is_active[static_cast<std::size_t>(a)] = true;
        std::vector<detail::Triple> keep;
        keep.reserve(accepted.size());
        for (auto& t : accepted) {
            bool touches = false;
            for (const auto& [row, val] : t)
                if (is_active[static_cast<std::size_t>(row)]) {
                    touches = true;
                    break;
                }
            if (touches)
                r.add_back(t);
            else
                keep.push_back(std::move(t));
        }
        accepted = std::move(keep);
        detail::drain(r, cfg, tau_r, cfg.repair_saturation, accepted);
    }

    if (accepted.size() != static_cast<std::size_t>(n) || r.nnz() != 0)
        throw IncompleteRecovery(
            accepted.size(),
            "recover_factor: " + std::to_string(accepted.size()) + " of " + std::to_string(n) +
                " columns certified (residual nnz " + std::to_string(r.nnz()) + ")");

    std::sort(accepted.begin(), accepted.end(), detail::TripleLess{});
    std::vector<Triplet> ts;
    for (int j = 0; j < n; ++j)
        for (const auto& [row, val] : accepted[static_cast<std::size_t>(j)])
            ts.push_back({row, j, val});
    RecoveredFactor out;
    out.factor = SparseIntMatrix::from_triplets(n, n, std::move(ts));
    out.candidate_count = accepted.size();
    out.repair_rounds = repairs;
    return out;
}

}  // namespace sparsefact
