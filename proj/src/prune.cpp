#include "sparsevit/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "sparsevit/errors.hpp"
#include "sparsevit/ops.hpp"

namespace sparsevit {

void PruningPlan::validate(int depth) const {
    if (!(ratio >= 0.0f && ratio < 1.0f))
        throw ValidationError("PruningPlan: ratio must be in [0, 1)");
    if (layer < 1 || layer > depth)
        throw ValidationError("PruningPlan: layer must be in [1, depth]");
}

ImportanceScores importance_scores(const CapturedGlobalRows& captured,
                                   const PruningPlan& plan) {
    if (captured.heads < 1 || captured.num_global < 1 ||
        captured.rows.rows() != captured.heads * captured.num_global)
        throw ShapeError("importance_scores: malformed captured rows");
    const int n = captured.rows.cols();
    const int g = captured.num_global;
    const int rows_per_head = plan.score_source == ScoreSource::ClsRow ? 1 : g;
    ImportanceScores out;
    out.scores.assign(n, 0.0f);
    for (int h = 0; h < captured.heads; ++h) {
        for (int r = 0; r < rows_per_head; ++r) {
            const float* row = captured.rows.row_ptr(h * g + r);
            for (int j = 0; j < n; ++j) out.scores[j] += row[j];
        }
    }
    const float inv = 1.0f / float(captured.heads * rows_per_head);
    for (float& s : out.scores) s *= inv;
    for (int j = 0; j < g; ++j)
        out.scores[j] = std::numeric_limits<float>::infinity();
    return out;
}

int drop_count(float ratio, int patch_count) {
    return int(std::floor(double(ratio) * double(patch_count)));
}

PruneResult prune_tokens(const Tensor2D& sequence, const ImportanceScores& scores,
                         const PruningPlan& plan, int num_global) {
    const int n = sequence.rows();
    if (int(scores.scores.size()) != n)
        throw ShapeError("prune_tokens: scores not aligned with sequence");
    if (num_global < 0 || num_global > n)
        throw ValidationError("prune_tokens: bad global count");
    const int patches = n - num_global;
    const int keep_patches = patches - drop_count(plan.ratio, patches);

    std::vector<int> order(patches);
    std::iota(order.begin(), order.end(), num_global);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const float sa = scores.scores[a];
        const float sb = scores.scores[b];
        if (sa != sb) return sa > sb;
        return a < b;
    });
    order.resize(keep_patches);

    PruneResult result;
    result.kept.reserve(num_global + keep_patches);
    for (int j = 0; j < num_global; ++j) result.kept.push_back(j);
    result.kept.insert(result.kept.end(), order.begin(), order.end());
    std::sort(result.kept.begin() + num_global, result.kept.end());
    result.reduced = gather_rows(sequence, result.kept);
    return result;
}

int PruneMap::pruned_count() const {
    int n = 0;
    for (std::uint8_t b : pruned) n += b;
    return n;
}

PruneMap prune_map(std::span<const int> kept, const TokenLayout& layout, int patch_size) {
    PruneMap map;
    map.grid_rows = layout.grid_rows();
    map.grid_cols = layout.grid_cols();
    map.patch_size = patch_size;
    map.pruned.assign(std::size_t(layout.patch_count()), 1);
    for (int idx : kept) {
        if (idx < 0 || idx >= layout.total())
            throw std::out_of_range("prune_map: kept index " + std::to_string(idx));
        if (layout.is_global(idx)) continue;
        const Coord c = layout.coord_of(idx);
        map.pruned[std::size_t(c.row) * map.grid_cols + c.col] = 0;
    }
    return map;
}

}  // namespace sparsevit
