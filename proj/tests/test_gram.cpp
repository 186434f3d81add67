#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "sparsefact/genmodel.hpp"
#include "sparsefact/gram.hpp"

#include "oracles.hpp"

using namespace sparsefact;

namespace {

GramGraph frozen_gram() {
    ModelParams p{16, 4, 1, 9};
    DenseMatrix y = forward_product(gen_factor_chain(p), p.d);
    return rounded_gram(y, p.d);
}

}  // namespace

TEST_CASE("rounded gram matches the frozen n=16 instance", "[gram]") {
    GramGraph g = frozen_gram();
    REQUIRE(g.order() == 16);

    // every frozen weight present...
    std::int64_t listed = 0;
    for (const auto& e : oracles::kGram16_upper) {
        CHECK(g.weight(e.i, e.j) == e.w);
        CHECK(g.weight(e.j, e.i) == e.w);  // symmetric storage
        ++listed;
    }
    REQUIRE(listed == 55);
    // ...and nothing else
    CHECK(g.nnz_offdiag() == 2 * listed);

    // the diagonal is exact here (entries are multiples of 1/d times d) and
    // includes the fully-cancelled row 10
    for (int i = 0; i < 16; ++i) CHECK(g.diag()[static_cast<std::size_t>(i)] == oracles::kGram16_diag[i]);
    CHECK(g.diag()[10] == 0.0);

    // depth-1 gram is integral: zero rounding margin
    CHECK(g.margin() <= 1e-9);
    CHECK_FALSE(g.ambiguous());
}

TEST_CASE("depth-1 gram equals the exact X X^T off-diagonal", "[gram]") {
    ModelParams p{64, 8, 1, 31};
    auto x = gen_factor_chain(p).front();
    DenseMatrix y = forward_product({x}, p.d);
    GramGraph g = rounded_gram(y, p.d);
    auto exact = exact_gram_offdiag(x);
    for (int i = 0; i < p.n; ++i)
        for (int j = 0; j < p.n; ++j) {
            if (i == j) continue;
            REQUIRE(static_cast<std::int64_t>(g.weight(i, j)) ==
                    exact[static_cast<std::size_t>(i) * p.n + j]);
        }
}

TEST_CASE("margin report is clean at depth 1", "[gram]") {
    ModelParams p{64, 8, 1, 5};
    auto x = gen_factor_chain(p).front();
    DenseMatrix y = forward_product({x}, p.d);
    MarginReport rep = gram_margin(y, p.d, x);
    CHECK(rep.max_deviation <= 1e-9);
    CHECK(rep.rounding_disagreements == 0);
    REQUIRE(rep.histogram.size() == 11);
    std::int64_t total = 0;
    for (std::int64_t c : rep.histogram) total += c;
    CHECK(total == static_cast<std::int64_t>(p.n) * (p.n - 1));
    CHECK(rep.histogram[0] == total);  // everything in the first bin
}

TEST_CASE("ambiguous rounding is flagged, not thrown", "[gram]") {
    DenseMatrix y(2, 2);
    y(0, 0) = 0.7;
    y(1, 0) = 0.7;  // G_01 = 0.49: distance 0.49 from the nearest integer
    GramGraph g = rounded_gram(y, 1);
    CHECK(g.margin() == Catch::Approx(0.49).margin(1e-12));
    CHECK(g.ambiguous());
    CHECK(g.weight(0, 1) == 0);  // rounds to zero; the diagonal stays raw
    CHECK(g.diag()[0] == Catch::Approx(0.49).margin(1e-12));
}

TEST_CASE("gram rejects bad input", "[gram]") {
    DenseMatrix rect(2, 3);
    CHECK_THROWS_AS(rounded_gram(rect, 1), DimensionMismatch);
    DenseMatrix y(2, 2);
    CHECK_THROWS_AS(rounded_gram(y, 0), Error);
    y(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rounded_gram(y, 1), NonFinite);

    ModelParams p{8, 2, 1, 1};
    auto x = gen_factor_chain(p).front();
    DenseMatrix ok = forward_product({x}, p.d);
    SparseIntMatrix wrong(4, 4);
    CHECK_THROWS_AS(gram_margin(ok, p.d, wrong), DimensionMismatch);
}

TEST_CASE("upper() serializes exactly the upper triangle", "[gram]") {
    GramGraph g = frozen_gram();
    SparseIntMatrix u = g.upper();
    REQUIRE(u.nnz() == 55);
    std::int64_t k = 0;
    // column-major iteration of the triplet form must reproduce the weights
    for (int j = 0; j < u.cols(); ++j)
        for (std::int64_t e = u.col_begin(j); e < u.col_end(j); ++e) {
            const int i = u.entry_row(e);
            REQUIRE(i < j);
            REQUIRE(u.entry_value(e) == g.weight(i, j));
            ++k;
        }
    CHECK(k == 55);
}

TEST_CASE("set_margin applies the ambiguity threshold", "[gram]") {
    GramGraph g(2);
    g.set_margin(0.4499);
    CHECK_FALSE(g.ambiguous());
    g.set_margin(0.45);
    CHECK(g.ambiguous());
}
