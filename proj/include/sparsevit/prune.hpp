#pragma once

#include <span>
#include <vector>

#include "sparsevit/layout.hpp"
#include "sparsevit/tensor.hpp"

namespace sparsevit {

enum class ScoreSource {
    ClsRow,             // attention row of the CLS token (sequence position 0)
    AllGlobalRowsMean,  // mean over every global token's row
};

struct PruningPlan {
    float ratio = 0.6f;  // proportion of patch tokens discarded, in [0, 1)
    int layer = 4;       // 1-based layer whose attention provides the scores
    ScoreSource score_source = ScoreSource::ClsRow;

    void validate(int depth) const;
};

// Post-softmax attention rows of the global queries at the pruning
// layer: row h*num_global + g holds head h, global g, over the current
// sequence.
struct CapturedGlobalRows {
    int heads = 0;
    int num_global = 0;
    Tensor2D rows;
};

struct ImportanceScores {
    std::vector<float> scores;  // aligned to the current sequence order
};

// Mean over heads of the selected global rows. Global tokens get a +inf
// sentinel so they are never pruned.
ImportanceScores importance_scores(const CapturedGlobalRows& captured,
                                   const PruningPlan& plan);

// floor(ratio * patch_count), evaluated in double.
int drop_count(float ratio, int patch_count);

struct PruneResult {
    Tensor2D reduced;
    std::vector<int> kept;  // ascending; preserves original sequence order
};

// Keeps all globals plus the highest-scoring patch tokens; score ties
// keep the lower index. Discarded tokens never reappear.
PruneResult prune_tokens(const Tensor2D& sequence, const ImportanceScores& scores,
                         const PruningPlan& plan, int num_global);

struct PruneMap {
    int grid_rows = 0;
    int grid_cols = 0;
    int patch_size = 0;
    std::vector<std::uint8_t> pruned;  // row-major, 1 = pruned

    bool at(int r, int c) const { return pruned[std::size_t(r) * grid_cols + c] != 0; }
    int pruned_count() const;
};

// Marks every grid cell whose token index is absent from kept.
PruneMap prune_map(std::span<const int> kept, const TokenLayout& layout, int patch_size);

}  // namespace sparsevit
