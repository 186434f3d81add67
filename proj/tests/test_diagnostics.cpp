#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "sparsefact/diagnostics.hpp"
#include "sparsefact/genmodel.hpp"

#include "oracles.hpp"

using namespace sparsefact;

namespace {

// Exact signed permutation matrix: row pi(j), column j, sign s(j).
SparseIntMatrix signed_permutation(int n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<int> pi(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pi[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(pi[static_cast<std::size_t>(i)],
                  pi[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1))]);
    std::vector<Triplet> ts;
    for (int j = 0; j < n; ++j)
        ts.push_back({pi[static_cast<std::size_t>(j)], j, (rng.next() >> 63) == 0 ? 1 : -1});
    return SparseIntMatrix::from_triplets(n, n, std::move(ts));
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST_CASE("propagation through zero layers is the vector itself", "[diagnostics]") {
    std::vector<std::pair<int, std::int32_t>> u = {{1, 2}, {5, -1}};
    auto q = propagate_vector(u, 8, {}, 4);
    REQUIRE(q.size() == 8);
    CHECK(q[1] == 2.0);
    CHECK(q[5] == -1.0);
    CHECK(q[0] == 0.0);
    CHECK_THROWS_AS(propagate_vector({{9, 1}}, 8, {}, 4), DimensionMismatch);
    CHECK_THROWS_AS(propagate_vector(u, 8, {}, 0), Error);
}

TEST_CASE("signed permutations preserve entry magnitudes exactly", "[diagnostics]") {
    // d = 1 chains built from exact signed permutations: propagation just
    // relabels coordinates, so max|q| is constant at every depth
    const int n = 32;
    std::vector<SparseIntMatrix> zs;
    for (std::uint64_t l = 0; l < 4; ++l) zs.push_back(signed_permutation(n, 100 + l));
    auto u = gen_sparse_column(n, 6, substream_seed(50, 0, 0));
    REQUIRE(!u.empty());

    std::vector<double> q0 = propagate_vector(u, n, {}, 1);
    std::vector<double> sorted0 = q0;
    for (double& v : sorted0) v = std::abs(v);
    std::sort(sorted0.begin(), sorted0.end());

    for (std::size_t depth = 1; depth <= zs.size(); ++depth) {
        std::vector<SparseIntMatrix> prefix(zs.begin(), zs.begin() + static_cast<long>(depth));
        std::vector<double> q = propagate_vector(u, n, prefix, 1);
        CHECK(max_abs(q) == max_abs(q0));
        // the whole magnitude multiset is preserved, not just the max
        std::vector<double> sorted = q;
        for (double& v : sorted) v = std::abs(v);
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == sorted0);
    }
}

TEST_CASE("generated d=1 chains never grow the max entry", "[diagnostics]") {
    // generated d=1 factors are not exact permutations (rows can collide or
    // go unsampled), so magnitudes may drop; they can never grow
    const int n = 64;
    for (std::uint64_t master : {3ull, 9ull, 27ull}) {
        ModelParams p{n, 1, 3, master};
        auto zs = gen_factor_chain(p);
        auto u = gen_sparse_column(n, 4, substream_seed(master, 5, 0));
        double prev = max_abs(propagate_vector(u, n, {}, 1));
        const double cap = prev;
        for (int depth = 1; depth <= 3; ++depth) {
            std::vector<SparseIntMatrix> prefix(zs.begin(), zs.begin() + depth);
            const double m = max_abs(propagate_vector(u, n, prefix, 1));
            CHECK(m <= prev + 1e-12);
            CHECK(m <= cap + 1e-12);
            prev = m;
        }
    }
}

TEST_CASE("propagation agrees with the naive dense oracle", "[diagnostics]") {
    ModelParams p{32, 4, 3, 71};
    auto zs = gen_factor_chain(p);
    auto u = gen_sparse_column(p.n, p.d, substream_seed(71, 9, 0));
    auto q = propagate_vector(u, p.n, zs, p.d);

    oracles::Dense row(1, p.n);
    for (const auto& [r, v] : u) row.at(0, r) += v;
    const double isd = 1.0 / std::sqrt(static_cast<double>(p.d));
    for (const auto& z : zs)
        row = oracles::matmul(row, oracles::scaled(oracles::to_oracle_dense(z), isd));
    for (int i = 0; i < p.n; ++i)
        REQUIRE(std::abs(q[static_cast<std::size_t>(i)] - row.at(0, i)) <= 1e-12);
}

TEST_CASE("growth profile tracks sparsity and moments through the chain", "[diagnostics]") {
    ModelParams p{1024, 6, 3, 77};
    const int trials = 100;
    auto agg = entry_growth_profile(p, trials);
    REQUIRE(agg.size() == 4);  // layers 0..3

    // layer 0 is the raw d-sparse vector
    CHECK(agg[0].layer == 0);
    CHECK(agg[0].nnz_max <= p.d);
    CHECK(agg[0].maxabs_max <= p.d);
    CHECK(agg[0].nnz_mean > 0.0);

    // below saturation (mean nnz <= n/8), one layer multiplies the support
    // by roughly d: check a generous [d/2, 2d] band
    for (std::size_t l = 0; l + 1 < agg.size(); ++l) {
        if (agg[l].nnz_mean > p.n / 8.0 || agg[l + 1].nnz_mean > p.n / 8.0) continue;
        const double ratio = agg[l + 1].nnz_mean / agg[l].nnz_mean;
        CHECK(ratio >= p.d / 2.0);
        CHECK(ratio <= 2.0 * p.d);
    }

    // propagation preserves expected energy: the mean second moment stays
    // within a loose constant band of its layer-0 value
    for (const auto& a : agg) {
        CHECK(a.m2 >= 0.3 * agg[0].m2);
        CHECK(a.m2 <= 3.0 * agg[0].m2);
        // Jensen: fourth moment dominates the squared second moment
        CHECK(a.m4 >= a.m2 * a.m2 * (1.0 - 1e-12));
        CHECK(a.bound_M_scale >= 1.0);
    }

    // disjoint supports make the layer-0 cross moment exactly zero
    CHECK(agg[0].cross == 0.0);
    CHECK(agg[0].cross_se >= 0.0);
}

TEST_CASE("profile internals agree with propagate_vector", "[diagnostics]") {
    ModelParams p{64, 4, 2, 31};
    auto agg = entry_growth_profile(p, 1);
    auto draw = diag_detail::draw_trial(p, 0, false);
    for (int l = 0; l <= p.s; ++l) {
        std::vector<SparseIntMatrix> prefix(draw.chain.begin(), draw.chain.begin() + l);
        auto q = propagate_vector(draw.u, p.n, prefix, p.d);
        double s2 = 0.0;
        int nnz = 0;
        for (double v : q) {
            s2 += v * v;
            if (v != 0.0) ++nnz;
        }
        CHECK(agg[static_cast<std::size_t>(l)].m2 == Catch::Approx(s2 / p.n).margin(1e-12));
        CHECK(agg[static_cast<std::size_t>(l)].nnz_mean == Catch::Approx(nnz).margin(1e-12));
        CHECK(agg[static_cast<std::size_t>(l)].maxabs_max == Catch::Approx(max_abs(q)).margin(1e-12));
    }
}

TEST_CASE("cross-moment estimate matches the frozen oracle", "[diagnostics]") {
    ModelParams p{64, 8, 1, 7};
    CrossMomentEstimate est = cross_correlation_estimate(p, 20);
    CHECK(est.estimate == Catch::Approx(oracles::kCross_estimate).margin(1e-9));
    CHECK(est.standard_error == Catch::Approx(oracles::kCross_se).margin(1e-9));
    CHECK(est.samples == 20 * 64);
}

TEST_CASE("depth-1 diagonal ratios are exactly one", "[diagnostics]") {
    ModelParams p{64, 4, 1, 3};
    DiagonalStats st = diagonal_concentration(p, 3);
    REQUIRE(st.rows_used > 0);
    CHECK(st.mean_ratio == Catch::Approx(1.0).margin(1e-12));
    CHECK(st.max_abs_deviation <= 1e-12);
    CHECK(st.rows_used + st.skipped_zero_rows == 3 * 64);
}

TEST_CASE("theory scale is sane", "[diagnostics]") {
    TheoryScale t = TheoryScale::for_params(1024, 8);
    CHECK(t.M >= 1.0);
    CHECK(t.layer_bound(1024, 0) == 1.0);
    // bounds grow with depth until the cap
    double prev = t.layer_bound(1024, 0);
    for (int l = 1; l < 10; ++l) {
        const double b = t.layer_bound(1024, l);
        CHECK(b >= prev - 1e-12);
        CHECK(b <= t.M * std::sqrt(2.0 * std::log(1024.0)) + 1e-9);
        prev = b;
    }
    // d = 1 degenerates to the log cap
    TheoryScale t1 = TheoryScale::for_params(64, 1);
    CHECK(t1.M == Catch::Approx(2.0 * std::log(64.0)).epsilon(1e-12));
}

TEST_CASE("diagnostics validate their parameters", "[diagnostics]") {
    ModelParams p{64, 4, 1, 3};
    CHECK_THROWS_AS(entry_growth_profile(p, 0), Error);
    CHECK_THROWS_AS(diagonal_concentration(p, 0), Error);
    ModelParams bad{1, 1, 1, 3};
    CHECK_THROWS_AS(entry_growth_profile(bad, 5), Error);
}
