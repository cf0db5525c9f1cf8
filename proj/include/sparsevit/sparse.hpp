#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "sparsevit/layout.hpp"
#include "sparsevit/tensor.hpp"

namespace sparsevit {

// Allowed query->key pairs: every token attends the tokens whose patch
// coordinates lie within Chebyshev distance w of its own, and global
// tokens pair bidirectionally with everything. Key lists come out in
// ascending index order (globals first, then patches row-major).
class SparsityPattern {
public:
    SparsityPattern(const TokenLayout& layout, int window_radius)
        : layout_(layout), w_(window_radius) {
        if (window_radius < 0)
            throw ValidationError("SparsityPattern: window radius must be >= 0");
    }

    const TokenLayout& layout() const { return layout_; }
    int window_radius() const { return w_; }

    bool allows(int i, int j) const {
        if (layout_.is_global(i) || layout_.is_global(j)) return true;
        const Coord a = layout_.coord_of(i);
        const Coord b = layout_.coord_of(j);
        return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col)) <= w_;
    }

    template <typename Fn>
    void for_each_allowed(int i, Fn&& fn) const {
        const int n = layout_.total();
        const int g = layout_.num_global();
        if (layout_.is_global(i)) {
            for (int j = 0; j < n; ++j) fn(j);
            return;
        }
        for (int j = 0; j < g; ++j) fn(j);
        const Coord a = layout_.coord_of(i);
        const int r0 = std::max(0, a.row - w_);
        const int r1 = std::min(layout_.grid_rows() - 1, a.row + w_);
        const int c0 = std::max(0, a.col - w_);
        const int c1 = std::min(layout_.grid_cols() - 1, a.col + w_);
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) fn(layout_.index_of(r, c));
    }

    std::vector<int> allowed(int i) const {
        std::vector<int> keys;
        keys.reserve(max_allowed_count());
        for_each_allowed(i, [&](int j) { keys.push_back(j); });
        return keys;
    }

    int allowed_count(int i) const {
        if (layout_.is_global(i)) return layout_.total();
        const Coord a = layout_.coord_of(i);
        const int er = std::min(layout_.grid_rows() - 1, a.row + w_) -
                       std::max(0, a.row - w_) + 1;
        const int ec = std::min(layout_.grid_cols() - 1, a.col + w_) -
                       std::max(0, a.col - w_) + 1;
        return layout_.num_global() + er * ec;
    }

    int max_allowed_count() const {
        const int win = std::min(2 * w_ + 1, layout_.grid_rows()) *
                        std::min(2 * w_ + 1, layout_.grid_cols());
        const int patch_row = layout_.num_global() + win;
        return layout_.num_global() > 0 ? std::max(layout_.total(), patch_row)
                                        : patch_row;
    }

    std::uint64_t total_allowed_pairs() const {
        std::uint64_t total = 0;
        for (int i = 0; i < layout_.total(); ++i) total += std::uint64_t(allowed_count(i));
        return total;
    }

private:
    TokenLayout layout_;
    int w_;
};

SparsityPattern build_sparsity_pattern(const TokenLayout& layout, int window_radius);

// Attention over only the allowed pairs, one gathered key set per query.
// Never materializes an NxN matrix: the score workspace is a single row
// of N floats per worker. q/k/v are per-head (N, d) triples; the result
// concatenates heads to (N, heads*d).
Tensor2D sparse_attention(std::span<const Tensor2D> q, std::span<const Tensor2D> k,
                          std::span<const Tensor2D> v, const SparsityPattern& pattern);

// Dense boolean view of a pattern, for export and inspection only.
struct MaskExport {
    int n = 0;
    std::vector<std::uint8_t> allowed;  // row-major, queries as rows

    bool at(int i, int j) const { return allowed[std::size_t(i) * n + j] != 0; }
    std::uint64_t popcount() const;
};

MaskExport export_mask(const SparsityPattern& pattern, int cap = 4096);

namespace detail {

// Scores, stabilized softmax, and value mix for one query row over an
// explicit key set. keys must be non-empty; ws holds keys.size() scores
// and contains the softmax weights afterwards. out_row (d floats) is
// overwritten.
void attend_row(const float* qrow, const Tensor2D& k, const Tensor2D& v,
                std::span<const int> keys, float inv_sqrt_d, float* ws, float* out_row);

}  // namespace detail

}  // namespace sparsevit
