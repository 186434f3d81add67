#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <vector>

#include "sparsefact/genmodel.hpp"
#include "sparsefact/matrix.hpp"

#include "oracles.hpp"

using namespace sparsefact;

TEST_CASE("gen_sparse_column matches frozen columns", "[genmodel]") {
    CHECK(gen_sparse_column(16, 4, 42) == oracles::kColumn_16_4_42);
    for (std::uint64_t seed = 0; seed < 4; ++seed)
        CHECK(gen_sparse_column(8, 1, seed) == oracles::kColumn_8_1[seed]);
    // n = 1: all d spikes collide on row 0; this seed leaves a net +1
    std::vector<std::pair<int, std::int32_t>> expect_n1 = {{0, 1}};
    CHECK(gen_sparse_column(1, 3, 5) == expect_n1);
}

TEST_CASE("generated columns satisfy the spike-sum invariants", "[genmodel]") {
    for (int n : {2, 8, 64, 257}) {
        for (int d : {1, 2, 3, 8, 16}) {
            if (d > n) continue;
            for (std::uint64_t seed = 0; seed < 40; ++seed) {
                auto col = gen_sparse_column(n, d, substream_seed(seed, 0, 0));
                std::int64_t l1 = 0;
                int prev_row = -1;
                for (const auto& [row, val] : col) {
                    REQUIRE(row > prev_row);  // ascending, hence unique
                    REQUIRE(row < n);
                    REQUIRE(val != 0);
                    prev_row = row;
                    l1 += std::abs(static_cast<std::int64_t>(val));
                }
                REQUIRE(static_cast<std::int64_t>(col.size()) <= d);
                REQUIRE(l1 <= d);
                REQUIRE((d - l1) % 2 == 0);
            }
        }
    }
}

TEST_CASE("factor chain n=64 d=4 matches frozen nnz, checksums, and columns", "[genmodel]") {
    ModelParams p{64, 4, 2, 1};
    auto chain = gen_factor_chain(p);
    REQUIRE(chain.size() == 2);
    for (int layer = 0; layer < 2; ++layer) {
        CHECK(chain[layer].nnz() == oracles::kChain64_nnz[layer]);
        CHECK(oracles::entry_checksum(chain[layer]) == oracles::kChain64_checksum[layer]);
    }
    CHECK(chain[0].column(0) == oracles::kChain64_layer0_col0);
    CHECK(chain[0].column(1) == oracles::kChain64_layer0_col1);
    CHECK(chain[1].column(0) == oracles::kChain64_layer1_col0);
    CHECK(chain[1].column(1) == oracles::kChain64_layer1_col1);
}

TEST_CASE("generation is a pure function of (master, layer, column)", "[genmodel]") {
    // regenerating a single column in isolation reproduces the chain's column
    ModelParams p{32, 3, 2, 77};
    auto chain = gen_factor_chain(p);
    for (int layer = 0; layer < 2; ++layer)
        for (int j : {0, 13, 31})
            CHECK(chain[layer].column(j) ==
                  gen_sparse_column(p.n, p.d, substream_seed(p.master_seed, layer, j)));
}

TEST_CASE("forward product n=8 d=2 s=2 matches frozen factors and Y", "[genmodel]") {
    ModelParams p{8, 2, 2, 3};
    auto chain = gen_factor_chain(p);

    std::vector<Triplet> t0, t1;
    for (const auto& e : oracles::kFwd8_X0) t0.push_back({e.row, e.col, e.value});
    for (const auto& e : oracles::kFwd8_X1) t1.push_back({e.row, e.col, e.value});
    CHECK(chain[0] == SparseIntMatrix::from_triplets(8, 8, std::move(t0)));
    CHECK(chain[1] == SparseIntMatrix::from_triplets(8, 8, std::move(t1)));

    DenseMatrix y = forward_product(chain, p.d);
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(8, 8);
    for (const auto& e : oracles::kFwd8_Y) expect(e.row, e.col) = e.value;
    double frob2 = 0.0;
    int nnz = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            // the frozen values are the exact multiples of 1/2; the per-layer
            // 1/sqrt(d) scaling reaches them to within an ulp or two
            REQUIRE(std::abs(y(i, j) - expect(i, j)) <= 1e-15);
            frob2 += y(i, j) * y(i, j);
            // entries are multiples of 1/2 up to an ulp, so a generous
            // threshold separates true nonzeros from rounding residue
            if (std::abs(y(i, j)) > 0.25) ++nnz;
        }
    CHECK(frob2 == Catch::Approx(oracles::kFwd8_Frob2).margin(1e-12));
    CHECK(nnz == 26);
}

TEST_CASE("forward product equals the naive dense oracle", "[genmodel]") {
    ModelParams p{24, 3, 3, 11};
    auto chain = gen_factor_chain(p);
    DenseMatrix y = forward_product(chain, p.d);
    const double scale = 1.0 / std::sqrt(3.0);
    oracles::Dense acc = oracles::scaled(oracles::to_oracle_dense(chain[0]), scale);
    for (std::size_t i = 1; i < chain.size(); ++i)
        acc = oracles::matmul(acc, oracles::scaled(oracles::to_oracle_dense(chain[i]), scale));
    double worst = 0.0;
    for (int i = 0; i < 24; ++i)
        for (int j = 0; j < 24; ++j) worst = std::max(worst, std::abs(y(i, j) - acc.at(i, j)));
    CHECK(worst <= 1e-12);
}

TEST_CASE("ModelParams validation rejects bad shapes", "[genmodel]") {
    CHECK_THROWS_AS((ModelParams{1, 1, 1, 0}.validate()), Error);
    CHECK_THROWS_AS((ModelParams{8, 0, 1, 0}.validate()), Error);
    CHECK_THROWS_AS((ModelParams{8, 9, 1, 0}.validate()), Error);
    CHECK_THROWS_AS((ModelParams{8, 2, 0, 0}.validate()), Error);
    CHECK_NOTHROW((ModelParams{8, 8, 1, 0}.validate()));
    CHECK_THROWS_AS(gen_factor_chain(ModelParams{1, 1, 1, 0}), Error);
}

TEST_CASE("forward_product rejects bad inputs", "[genmodel]") {
    CHECK_THROWS_AS(forward_product({}, 2), Error);
    ModelParams p{8, 2, 1, 3};
    auto chain = gen_factor_chain(p);
    CHECK_THROWS_AS(forward_product(chain, 0), Error);
    chain.push_back(SparseIntMatrix(4, 4));
    CHECK_THROWS_AS(forward_product(chain, 2), DimensionMismatch);
}

TEST_CASE("precision guard stays quiet at desk scale", "[genmodel]") {
    CHECK_FALSE(precision_suspect(1024, 3));
    CHECK_FALSE(precision_suspect(4096, 10));
    CHECK(precision_suspect(1 << 20, 60000));
}
