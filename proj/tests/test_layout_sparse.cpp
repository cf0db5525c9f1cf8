#include <algorithm>
#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "sparsevit/cost.hpp"
#include "sparsevit/errors.hpp"
#include "sparsevit/model.hpp"
#include "sparsevit/sparse.hpp"

using namespace sparsevit;

namespace {

Tensor2D random_tensor(int rows, int cols, std::uint32_t seed) {
    std::mt19937 gen(seed);
    Tensor2D t(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            t.at(r, c) = float(gen() >> 8) * (2.0f / 16777216.0f) - 1.0f;
    return t;
}

std::vector<std::vector<double>> widen_heads(const std::vector<Tensor2D>& heads) {
    std::vector<std::vector<double>> out;
    for (const Tensor2D& h : heads) {
        std::vector<double> m;
        for (int r = 0; r < h.rows(); ++r)
            for (int c = 0; c < h.cols(); ++c) m.push_back(double(h.at(r, c)));
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

TEST_CASE("token layout arithmetic and bijection") {
    const TokenLayout a = TokenLayout::for_image(224, 224, 14, 1);
    CHECK(a.grid_rows() == 16);
    CHECK(a.grid_cols() == 16);
    CHECK(a.patch_count() == 256);
    CHECK(a.total() == 257);

    const TokenLayout big = TokenLayout::for_image(3136, 3136, 14, 1);
    CHECK(big.patch_count() == 50176);
    CHECK(big.grid_rows() == 224);

    CHECK_THROWS_AS(TokenLayout::for_image(225, 224, 14, 1), ResolutionError);

    const TokenLayout l(5, 7, 2);
    for (int i = l.num_global(); i < l.total(); ++i) {
        const Coord c = l.coord_of(i);
        CHECK(l.index_of(c.row, c.col) == i);
        CHECK(c.row >= 0);
        CHECK(c.row < 5);
        CHECK(c.col >= 0);
        CHECK(c.col < 7);
    }
    CHECK(l.is_global(0));
    CHECK(l.is_global(1));
    CHECK_FALSE(l.is_global(2));
    CHECK_THROWS_AS(l.coord_of(0), std::out_of_range);
}

TEST_CASE("corner patch window at w=1 holds four neighbors plus CLS") {
    const TokenLayout l(4, 4, 1);
    const SparsityPattern p(l, 1);
    const std::vector<int> keys = p.allowed(l.index_of(0, 0));
    const std::vector<int> expected{0, l.index_of(0, 0), l.index_of(0, 1),
                                    l.index_of(1, 0), l.index_of(1, 1)};
    CHECK(keys == expected);
}

TEST_CASE("window covering the grid is dense") {
    const TokenLayout l(4, 4, 1);
    for (int w : {3, 4, 10}) {
        const SparsityPattern p(l, w);
        CHECK(p.total_allowed_pairs() == 17ull * 17ull);
    }
    // one short of covering is not dense
    CHECK(SparsityPattern(l, 2).total_allowed_pairs() < 17ull * 17ull);
}

TEST_CASE("4x4 grid with CLS at w=1 has exactly 133 allowed pairs") {
    const std::uint64_t brute = oracles::chebyshev_pairs_bruteforce(4, 4, 1, 1);
    CHECK(brute == 133);
    const SparsityPattern p(TokenLayout(4, 4, 1), 1);
    CHECK(p.total_allowed_pairs() == brute);
    CHECK(pattern_cells_closed_form(4, 4, 1, 1) == brute);
}

TEST_CASE("pattern symmetry, self-attention, and monotonicity over random grids") {
    std::mt19937 gen(21);
    for (int iter = 0; iter < 40; ++iter) {
        const int rows = 1 + int(gen() % 7);
        const int cols = 1 + int(gen() % 7);
        const int g = int(gen() % 3);
        const int w1 = int(gen() % 4);
        const int w2 = w1 + int(gen() % 3);
        const TokenLayout l(rows, cols, g);
        const SparsityPattern p1(l, w1);
        const SparsityPattern p2(l, w2);
        for (int i = 0; i < l.total(); ++i) {
            CHECK(p1.allows(i, i));
            const std::vector<int> keys = p1.allowed(i);
            CHECK(std::is_sorted(keys.begin(), keys.end()));
            CHECK(int(keys.size()) == p1.allowed_count(i));
            if (!l.is_global(i))
                CHECK(int(keys.size()) <= (2 * w1 + 1) * (2 * w1 + 1) + g);
            for (int j = 0; j < l.total(); ++j) {
                CHECK(p1.allows(i, j) == p1.allows(j, i));
                if (p1.allows(i, j)) CHECK(p2.allows(i, j));  // w1 <= w2
            }
        }
        CHECK(p1.total_allowed_pairs() ==
              oracles::chebyshev_pairs_bruteforce(rows, cols, g, w1));
    }
}

TEST_CASE("mask export matches the pattern and rejects oversized layouts") {
    const SparsityPattern p(TokenLayout(4, 4, 1), 1);
    const MaskExport mask = export_mask(p);
    CHECK(mask.n == 17);
    CHECK(mask.popcount() == 133);
    for (int i = 0; i < 17; ++i) {
        CHECK(mask.at(i, i));  // self-attention
        CHECK(mask.at(0, i));  // CLS row
        CHECK(mask.at(i, 0));  // CLS column
    }
    CHECK_THROWS_AS(export_mask(p, 16), ExportTooLargeError);
}

TEST_CASE("single global token attends itself and returns v") {
    const TokenLayout l(1, 1, 0);
    // a 1x1 grid with no globals still self-attends
    const SparsityPattern p(l, 0);
    std::vector<Tensor2D> q, k, v;
    q.push_back(random_tensor(1, 4, 31));
    k.push_back(random_tensor(1, 4, 32));
    v.push_back(random_tensor(1, 4, 33));
    const Tensor2D out = sparse_attention(q, k, v, p);
    for (int c = 0; c < 4; ++c) CHECK(out.at(0, c) == doctest::Approx(v[0].at(0, c)));
}

TEST_CASE("sparse attention equals dense attention when the window covers the grid") {
    const TokenLayout l(3, 4, 1);
    const SparsityPattern p(l, 3);
    const int n = l.total();
    std::vector<Tensor2D> q, k, v;
    for (int h = 0; h < 2; ++h) {
        q.push_back(random_tensor(n, 8, 40 + h));
        k.push_back(random_tensor(n, 8, 50 + h));
        v.push_back(random_tensor(n, 8, 60 + h));
    }
    const Tensor2D sparse = sparse_attention(q, k, v, p);
    const Tensor2D dense = dense_attention(q, k, v);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < 16; ++c)
            CHECK(std::abs(sparse.at(r, c) - dense.at(r, c)) < 1e-6f);
}

TEST_CASE("sparse attention matches the masked-dense oracle at w=1") {
    const TokenLayout l(4, 4, 1);
    const SparsityPattern p(l, 1);
    const int n = l.total();
    std::vector<Tensor2D> q, k, v;
    for (int h = 0; h < 2; ++h) {
        q.push_back(random_tensor(n, 4, 70 + h));
        k.push_back(random_tensor(n, 4, 80 + h));
        v.push_back(random_tensor(n, 4, 90 + h));
    }
    const Tensor2D got = sparse_attention(q, k, v, p);
    const auto expected =
        oracles::attention(widen_heads(q), widen_heads(k), widen_heads(v), n, 4,
                           [&](int i, int j) { return p.allows(i, j); });
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < 8; ++c)
            CHECK(std::abs(double(got.at(r, c)) - expected[std::size_t(r) * 8 + c]) < 1e-5);
}

TEST_CASE("sparse attention workspace stays linear in the sequence") {
    const TokenLayout l(8, 8, 1);
    const SparsityPattern p(l, 1);
    const int n = l.total();
    const int d = 8;
    std::vector<Tensor2D> q, k, v;
    q.push_back(random_tensor(n, d, 100));
    k.push_back(random_tensor(n, d, 101));
    v.push_back(random_tensor(n, d, 102));

    AllocationMeter meter;
    {
        MeterScope scope(meter);
        const Tensor2D out = sparse_attention(q, k, v, p);
        CHECK(out.rows() == n);
    }
    // output (n x d) plus one n-float score row; far below any n^2 term
    const std::uint64_t expected = 4ull * (std::uint64_t(n) * d + std::uint64_t(n));
    CHECK(meter.peak_bytes() == expected);
    CHECK(meter.peak_bytes() < 4ull * std::uint64_t(n) * n);

    AllocationMeter dense_meter;
    {
        MeterScope scope(dense_meter);
        const Tensor2D out = dense_attention(q, k, v);
        CHECK(out.rows() == n);
    }
    CHECK(dense_meter.peak_bytes() > 4ull * std::uint64_t(n) * n);
    CHECK(meter.peak_bytes() < dense_meter.peak_bytes());
}

TEST_CASE("sparse attention input validation") {
    const SparsityPattern p(TokenLayout(2, 2, 1), 1);
    std::vector<Tensor2D> q, k, v;
    q.push_back(Tensor2D(4, 4));  // wrong row count (layout total is 5)
    k.push_back(Tensor2D(4, 4));
    v.push_back(Tensor2D(4, 4));
    CHECK_THROWS_AS(sparse_attention(q, k, v, p), ShapeError);
}
