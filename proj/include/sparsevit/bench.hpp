#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sparsevit/model.hpp"

namespace sparsevit {

struct SweepSpec {
    std::vector<int> resolutions{224, 448, 896};
    std::vector<std::string> modes{"vanilla", "sparse", "sparse-prune"};
    std::vector<int> windows{2, 8, 16, 64};
    std::vector<float> prune_ratios{0.4f, 0.5f, 0.6f, 0.7f, 0.8f};
    int prune_layer = 4;
    int repetitions = 3;
    std::uint64_t seed = 0;
    std::uint64_t mem_budget_bytes = 0;  // 0 = unlimited; above it a row goes "oom"

    void validate() const;
};

struct BenchRecord {
    int resolution = 0;
    std::string mode;
    int window = 0;
    float prune_ratio = 0.0f;
    int prune_layer = 0;
    int token_count = 0;
    double wall_time_seconds = 0.0;  // median over repetitions
    std::uint64_t accounted_peak_bytes = 0;
    std::uint64_t predicted_cells = 0;
    std::uint64_t run_seed = 0;
    std::string status;  // "ok" or "oom"
    std::uint64_t attn_peak_bytes = 0;
    std::uint64_t predicted_attn_peak_bytes = 0;
    std::uint64_t predicted_peak_bytes = 0;
};

RunMode parse_mode(const std::string& name, int window, float prune_ratio, int prune_layer);

// One deterministic random image per resolution; repetitions rerun the
// same forward and keep the median wall time. Points whose predicted
// weights-plus-activations exceed the budget are not run and read "oom".
std::vector<BenchRecord> run_sweep(const ModelConfig& cfg, const Checkpoint& ckpt,
                                   const SweepSpec& spec);

void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records);

}  // namespace sparsevit
