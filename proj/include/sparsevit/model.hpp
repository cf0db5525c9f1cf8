#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsevit/layout.hpp"
#include "sparsevit/prune.hpp"
#include "sparsevit/tensor.hpp"

namespace sparsevit {

struct ModelConfig {
    int patch_size = 14;
    int embed_dim = 64;
    int depth = 6;
    int num_heads = 4;
    float mlp_ratio = 4.0f;
    int num_global_tokens = 1;  // the CLS token
    int base_grid_rows = 16;    // positional-embedding training grid
    int base_grid_cols = 16;
    float layernorm_eps = 1e-6f;

    int head_dim() const { return embed_dim / num_heads; }
    int mlp_hidden() const { return int(float(embed_dim) * mlp_ratio); }

    void validate() const;

    // Small randomly initialized configuration used by the benchmarks and
    // tests; every correctness property here is weight-agnostic.
    static ModelConfig desk_default() { return ModelConfig{}; }
};

struct NamedTensor {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;

    std::uint64_t numel() const {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

// Named weight tensors. Held outside the allocation meter: weights are a
// constant footprint reported separately from activations.
struct Checkpoint {
    std::map<std::string, NamedTensor> tensors;

    const NamedTensor& at(const std::string& name) const;
    std::uint64_t payload_bytes() const;
};

// Every tensor name the config requires, with its exact shape.
std::vector<std::pair<std::string, std::vector<std::uint64_t>>> required_tensors(
    const ModelConfig& cfg);

// Exact name and shape check; throws ValidationError on any mismatch.
void validate_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt);

Checkpoint make_random_checkpoint(const ModelConfig& cfg, std::uint64_t seed);

// Planar float image, HWC order, 3 channels.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;

    float at(int y, int x, int c) const {
        return data[(std::size_t(y) * width + x) * 3 + c];
    }
    float& at(int y, int x, int c) {
        return data[(std::size_t(y) * width + x) * 3 + c];
    }
};

Image make_random_image(int height, int width, std::uint64_t seed);

// Flattens each patch_size x patch_size tile (pixel row-major, channels
// interleaved), projects it to embed_dim, and prepends the global token
// embeddings. Positional embeddings are added separately by forward().
std::pair<Tensor2D, TokenLayout> patchify(const Image& image, const ModelConfig& cfg,
                                          const Checkpoint& ckpt);

// Bilinear interpolation of the patch positional table (base is rank-3:
// rows x cols x dim) onto a target grid, align-corners. Returns a
// (rows*cols, dim) tensor; the identity target still copies.
Tensor2D interpolate_pos_embed(const NamedTensor& base, int target_rows, int target_cols);

// Full softmax(q k^T / sqrt(d)) v per head, heads concatenated. This is
// the baseline path and materializes the NxN matrix by construction.
Tensor2D dense_attention(std::span<const Tensor2D> q, std::span<const Tensor2D> k,
                         std::span<const Tensor2D> v);

enum class AttentionKind { Dense, SparseWindow };

struct RunMode {
    AttentionKind attention = AttentionKind::Dense;
    int window = 8;
    bool prune = false;
    float prune_ratio = 0.6f;
    int prune_layer = 4;  // 1-based; pruning applies once, after this layer
    ScoreSource score_source = ScoreSource::ClsRow;

    static RunMode vanilla() { return RunMode{}; }
    static RunMode sparse(int w) {
        return RunMode{AttentionKind::SparseWindow, w, false, 0.0f, 0, ScoreSource::ClsRow};
    }
    static RunMode sparse_prune(int w, float p, int layer) {
        return RunMode{AttentionKind::SparseWindow, w, true, p, layer, ScoreSource::ClsRow};
    }
};

void validate_mode(const ModelConfig& cfg, const RunMode& mode);

struct InferenceOutput {
    std::vector<float> cls_embedding;
    std::vector<int> surviving_token_indices;       // original positions, sorted
    std::vector<int> per_layer_token_counts;        // input count of each layer
    std::vector<std::uint64_t> per_layer_attention_pairs;  // visited (q,k) pairs x heads
    double wall_time_seconds = 0.0;
    std::uint64_t peak_bytes = 0;            // peak live activation bytes
    std::uint64_t attention_peak_bytes = 0;  // peak attention-core workspace bytes
};

InferenceOutput forward(const Image& image, const ModelConfig& cfg, const Checkpoint& ckpt,
                        const RunMode& mode);

}  // namespace sparsevit
