#include "sparsevit/cost.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "sparsevit/errors.hpp"
#include "sparsevit/layout.hpp"
#include "sparsevit/prune.hpp"
#include "sparsevit/threading.hpp"

namespace sparsevit {

namespace {

std::uint64_t axis_extent_sum(int extent, int w) {
    std::uint64_t s = 0;
    for (int r = 0; r < extent; ++r)
        s += std::uint64_t(std::min(r + w, extent - 1) - std::max(r - w, 0) + 1);
    return s;
}

}  // namespace

std::uint64_t pattern_cells_closed_form(int grid_rows, int grid_cols, int num_global,
                                        int w) {
    const std::uint64_t pp = axis_extent_sum(grid_rows, w) * axis_extent_sum(grid_cols, w);
    const std::uint64_t patches = std::uint64_t(grid_rows) * grid_cols;
    const std::uint64_t n = patches + std::uint64_t(num_global);
    return pp + patches * std::uint64_t(num_global) + std::uint64_t(num_global) * n;
}

namespace {

// Replays forward()'s allocation sequence. Sizes are element counts;
// bytes are elements * sizeof(float). Any change to the engine's
// allocation discipline must be mirrored here (the meter-agreement
// tests enforce the pairing).
struct AllocSim {
    std::uint64_t cur = 0;
    std::uint64_t peak = 0;
    std::uint64_t attn_peak = 0;
    std::uint64_t phase_base = 0;
    std::uint64_t phase_peak = 0;

    void alloc(std::uint64_t elems) {
        cur += elems * 4;
        peak = std::max(peak, cur);
        phase_peak = std::max(phase_peak, cur);
    }
    void release(std::uint64_t elems) { cur -= elems * 4; }
    void phase_begin() {
        phase_base = cur;
        phase_peak = cur;
    }
    void phase_end() { attn_peak = std::max(attn_peak, phase_peak - phase_base); }
};

struct PeakPrediction {
    std::uint64_t peak_bytes = 0;
    std::uint64_t attention_peak_bytes = 0;
};

PeakPrediction simulate_forward(const ModelConfig& cfg, const TokenLayout& layout,
                                const RunMode& mode, int tokens_after) {
    const std::uint64_t P = layout.patch_count();
    const std::uint64_t g = cfg.num_global_tokens;
    const std::uint64_t N = P + g;
    const std::uint64_t D = cfg.embed_dim;
    const std::uint64_t d = cfg.head_dim();
    const std::uint64_t H = cfg.mlp_hidden();
    const std::uint64_t patch_elems = 3ull * cfg.patch_size * cfg.patch_size;
    const std::uint64_t workers = std::uint64_t(thread_count());
    const bool sparse = mode.attention == AttentionKind::SparseWindow;

    AllocSim s;
    // patchify: patches, projection, token assembly
    s.alloc(P * patch_elems);
    s.alloc(P * D);
    s.release(P * patch_elems);
    s.alloc(N * D);
    s.release(P * D);
    // interpolated positional table
    s.alloc(P * D);
    s.release(P * D);

    std::uint64_t n = N;
    for (int layer = 1; layer <= cfg.depth; ++layer) {
        const bool capture = mode.prune && layer == mode.prune_layer;
        s.alloc(n * D);      // norm1 output
        s.alloc(n * 3 * D);  // qkv
        s.release(n * D);
        s.phase_begin();
        s.alloc(n * D);  // attention output
        if (sparse) {
            s.alloc(workers * n);  // score workspace
            if (capture) s.alloc(std::uint64_t(cfg.num_heads) * g * n);
            for (int h = 0; h < cfg.num_heads; ++h) {
                s.alloc(3 * n * d);
                s.release(3 * n * d);
            }
            s.release(workers * n);
        } else {
            for (int h = 0; h < cfg.num_heads; ++h) {
                s.alloc(3 * n * d);
                s.alloc(n * n);  // scores
                s.alloc(n * n);  // probabilities
                s.release(n * n);
                s.alloc(n * d);  // mixed values
                s.release(n * d);
                s.release(n * n);
                s.release(3 * n * d);
            }
        }
        s.phase_end();
        s.release(n * 3 * D);
        if (capture) s.release(std::uint64_t(cfg.num_heads) * g * n);
        s.alloc(n * D);    // projection, attention output still live
        s.release(n * D);  // attention output
        s.release(n * D);  // projection after residual add
        s.alloc(n * D);    // norm2 output
        s.alloc(n * H);    // mlp hidden
        s.release(n * D);
        s.alloc(n * D);  // mlp output
        s.release(n * H);
        s.release(n * D);
        if (capture) {
            s.alloc(std::uint64_t(tokens_after) * D);  // surviving rows
            s.release(n * D);
            n = std::uint64_t(tokens_after);
        }
    }
    s.alloc(n * D);  // final norm
    s.release(n * D);
    s.release(n * D);  // token matrix
    return {s.peak, s.attn_peak};
}

}  // namespace

CostReport predict(const ModelConfig& cfg, int resolution, const RunMode& mode) {
    cfg.validate();
    validate_mode(cfg, mode);
    const TokenLayout layout =
        TokenLayout::for_image(resolution, resolution, cfg.patch_size, cfg.num_global_tokens);
    const int P = layout.patch_count();
    const int g = cfg.num_global_tokens;
    const int N = layout.total();
    const std::uint64_t heads = cfg.num_heads;
    const bool sparse = mode.attention == AttentionKind::SparseWindow;

    CostReport report;
    report.resolution = resolution;
    report.grid_rows = layout.grid_rows();
    report.grid_cols = layout.grid_cols();
    report.tokens_before = N;
    report.tokens_after = N;

    report.cells_per_layer_before =
        sparse ? heads * pattern_cells_closed_form(layout.grid_rows(), layout.grid_cols(),
                                                   g, mode.window)
               : heads * std::uint64_t(N) * N;
    report.cells_per_layer_after = report.cells_per_layer_before;

    if (mode.prune) {
        const int kept = P - drop_count(mode.prune_ratio, P);
        report.tokens_after = g + kept;
        const std::uint64_t pp = axis_extent_sum(layout.grid_rows(), mode.window) *
                                 axis_extent_sum(layout.grid_cols(), mode.window);
        const double kf = double(kept) / double(P);
        const auto pp_after = std::uint64_t(std::llround(double(pp) * kf * kf));
        report.cells_per_layer_after =
            heads * (pp_after + std::uint64_t(kept) * g +
                     std::uint64_t(g) * (std::uint64_t(g) + kept));
    }

    report.total_cells = 0;
    for (int layer = 1; layer <= cfg.depth; ++layer)
        report.total_cells += (mode.prune && layer > mode.prune_layer)
                                  ? report.cells_per_layer_after
                                  : report.cells_per_layer_before;

    const std::uint64_t D = cfg.embed_dim;
    const std::uint64_t d = cfg.head_dim();
    const std::uint64_t H = cfg.mlp_hidden();
    std::uint64_t flops = 2ull * P * (3ull * cfg.patch_size * cfg.patch_size) * D;
    for (int layer = 1; layer <= cfg.depth; ++layer) {
        const bool after = mode.prune && layer > mode.prune_layer;
        const std::uint64_t n = after ? report.tokens_after : report.tokens_before;
        const std::uint64_t cells =
            after ? report.cells_per_layer_after : report.cells_per_layer_before;
        flops += 2 * n * D * 3 * D;  // qkv projection
        flops += 10 * n * D;         // the two layernorms
        flops += 2 * cells * d;      // scores
        flops += 3 * cells;          // softmax
        flops += 2 * cells * d;      // value mix
        flops += 2 * n * D * D;      // output projection
        flops += 4 * n * D * H;      // mlp
    }
    flops += 5ull * report.tokens_after * D;  // final norm
    report.flops_estimate = flops;

    const PeakPrediction peaks = simulate_forward(cfg, layout, mode, report.tokens_after);
    report.predicted_peak_bytes = peaks.peak_bytes;
    report.predicted_attention_peak_bytes = peaks.attention_peak_bytes;

    std::uint64_t weights = 0;
    for (const auto& [name, dims] : required_tensors(cfg)) {
        std::uint64_t numel = 1;
        for (auto v : dims) numel *= v;
        weights += numel * sizeof(float);
    }
    report.weight_bytes = weights;
    return report;
}

std::uint64_t predicted_total_bytes(const CostReport& report) {
    return report.weight_bytes + report.predicted_peak_bytes;
}

std::string cost_report_text(const CostReport& r) {
    std::ostringstream os;
    os << "resolution " << r.resolution << " (" << r.grid_rows << "x" << r.grid_cols
       << " patch grid)\n"
       << "  tokens:                " << r.tokens_before << " -> " << r.tokens_after << "\n"
       << "  attention cells/layer: " << r.cells_per_layer_before << " -> "
       << r.cells_per_layer_after << "\n"
       << "  total attention cells: " << r.total_cells << "\n"
       << "  flops estimate:        " << r.flops_estimate << "\n"
       << "  attention peak:        " << r.predicted_attention_peak_bytes << " bytes\n"
       << "  activation peak:       " << r.predicted_peak_bytes << " bytes\n"
       << "  weights:               " << r.weight_bytes << " bytes\n";
    return os.str();
}

void write_cost_report_csv(std::ostream& out, std::span<const CostReport> reports) {
    out << "resolution,grid_rows,grid_cols,tokens_before,tokens_after,"
           "cells_per_layer_before,cells_per_layer_after,total_cells,flops_estimate,"
           "predicted_attn_peak_bytes,predicted_peak_bytes,weight_bytes\n";
    for (const CostReport& r : reports)
        out << r.resolution << ',' << r.grid_rows << ',' << r.grid_cols << ','
            << r.tokens_before << ',' << r.tokens_after << ',' << r.cells_per_layer_before
            << ',' << r.cells_per_layer_after << ',' << r.total_cells << ','
            << r.flops_estimate << ',' << r.predicted_attention_peak_bytes << ','
            << r.predicted_peak_bytes << ',' << r.weight_bytes << '\n';
}

int max_resolution_under_budget(const ModelConfig& cfg, const RunMode& mode,
                                std::uint64_t budget_bytes, int max_resolution) {
    cfg.validate();
    const int step = cfg.patch_size;
    const int max_k = std::max(1, max_resolution / step);
    const auto fits = [&](int k) {
        return predicted_total_bytes(predict(cfg, k * step, mode)) <= budget_bytes;
    };
    if (!fits(1))
        throw InfeasibleBudgetError("budget below the cost of a single-patch input");
    // predicted cost is monotone in resolution, so bisect on the last fit
    int lo = 1, hi = max_k;
    while (lo < hi) {
        const int mid = lo + (hi - lo + 1) / 2;
        if (fits(mid))
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo * step;
}

}  // namespace sparsevit
