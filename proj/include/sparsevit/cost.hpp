#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "sparsevit/model.hpp"

namespace sparsevit {

struct CostReport {
    int resolution = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    int tokens_before = 0;
    int tokens_after = 0;  // equals tokens_before without pruning

    // Attention score cells per layer, summed over heads. Cells after the
    // pruning layer use the expected surviving pattern: patch-patch pairs
    // scale by the squared keep fraction, global pairs exactly.
    std::uint64_t cells_per_layer_before = 0;
    std::uint64_t cells_per_layer_after = 0;
    std::uint64_t total_cells = 0;

    std::uint64_t flops_estimate = 0;  // multiply-add counted as 2

    // Byte predictions replay the engine's allocation sequence, so they
    // match the meter exactly for the process's configured worker count.
    std::uint64_t predicted_attention_peak_bytes = 0;
    std::uint64_t predicted_peak_bytes = 0;  // activations, weights excluded
    std::uint64_t weight_bytes = 0;
};

// Sum over all queries of the allowed-key count for a grid_rows x
// grid_cols grid with num_global global tokens and window radius w.
// Separable: patch-patch pairs are the product of per-axis extent sums.
std::uint64_t pattern_cells_closed_form(int grid_rows, int grid_cols, int num_global,
                                        int w);

CostReport predict(const ModelConfig& cfg, int resolution, const RunMode& mode);

// Weights plus predicted activation peak; what a budget must cover.
std::uint64_t predicted_total_bytes(const CostReport& report);

std::string cost_report_text(const CostReport& report);
void write_cost_report_csv(std::ostream& out, std::span<const CostReport> reports);

// Largest patch-divisible resolution (square inputs, at most
// max_resolution) whose weights-plus-activations prediction fits the
// budget. Throws InfeasibleBudgetError when even one patch does not fit.
int max_resolution_under_budget(const ModelConfig& cfg, const RunMode& mode,
                                std::uint64_t budget_bytes,
                                int max_resolution = 14 * 1024);

}  // namespace sparsevit
