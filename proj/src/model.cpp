#include "sparsevit/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "sparsevit/errors.hpp"
#include "sparsevit/ops.hpp"
#include "sparsevit/sparse.hpp"
#include "sparsevit/threading.hpp"

namespace sparsevit {

void ModelConfig::validate() const {
    if (patch_size < 1) throw ValidationError("config: patch_size must be >= 1");
    if (embed_dim < 1) throw ValidationError("config: embed_dim must be >= 1");
    if (depth < 1) throw ValidationError("config: depth must be >= 1");
    if (num_heads < 1) throw ValidationError("config: num_heads must be >= 1");
    if (embed_dim % num_heads != 0)
        throw ValidationError("config: embed_dim must be divisible by num_heads");
    if (!(mlp_ratio > 0.0f)) throw ValidationError("config: mlp_ratio must be > 0");
    if (num_global_tokens < 1)
        throw ValidationError("config: num_global_tokens must be >= 1");
    if (base_grid_rows < 1 || base_grid_cols < 1)
        throw ValidationError("config: base grid must be >= 1x1");
    if (!(layernorm_eps > 0.0f)) throw ValidationError("config: layernorm_eps must be > 0");
}

const NamedTensor& Checkpoint::at(const std::string& name) const {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw ValidationError("checkpoint: missing tensor " + name);
    return it->second;
}

std::uint64_t Checkpoint::payload_bytes() const {
    std::uint64_t total = 0;
    for (const auto& [name, t] : tensors) total += t.numel() * sizeof(float);
    return total;
}

std::vector<std::pair<std::string, std::vector<std::uint64_t>>> required_tensors(
    const ModelConfig& cfg) {
    const auto g = std::uint64_t(cfg.num_global_tokens);
    const auto d = std::uint64_t(cfg.embed_dim);
    const auto h = std::uint64_t(cfg.mlp_hidden());
    const auto pp = std::uint64_t(cfg.patch_size) * cfg.patch_size * 3;
    std::vector<std::pair<std::string, std::vector<std::uint64_t>>> req;
    req.emplace_back("global_tokens", std::vector<std::uint64_t>{g, d});
    req.emplace_back("patch_embed.weight", std::vector<std::uint64_t>{pp, d});
    req.emplace_back("patch_embed.bias", std::vector<std::uint64_t>{d});
    req.emplace_back("pos_embed.patch",
                     std::vector<std::uint64_t>{std::uint64_t(cfg.base_grid_rows),
                                                std::uint64_t(cfg.base_grid_cols), d});
    req.emplace_back("pos_embed.global", std::vector<std::uint64_t>{g, d});
    for (int i = 0; i < cfg.depth; ++i) {
        const std::string p = "blocks." + std::to_string(i);
        req.emplace_back(p + ".norm1.gamma", std::vector<std::uint64_t>{d});
        req.emplace_back(p + ".norm1.beta", std::vector<std::uint64_t>{d});
        req.emplace_back(p + ".attn.qkv.weight", std::vector<std::uint64_t>{d, 3 * d});
        req.emplace_back(p + ".attn.qkv.bias", std::vector<std::uint64_t>{3 * d});
        req.emplace_back(p + ".attn.proj.weight", std::vector<std::uint64_t>{d, d});
        req.emplace_back(p + ".attn.proj.bias", std::vector<std::uint64_t>{d});
        req.emplace_back(p + ".norm2.gamma", std::vector<std::uint64_t>{d});
        req.emplace_back(p + ".norm2.beta", std::vector<std::uint64_t>{d});
        req.emplace_back(p + ".mlp.fc1.weight", std::vector<std::uint64_t>{d, h});
        req.emplace_back(p + ".mlp.fc1.bias", std::vector<std::uint64_t>{h});
        req.emplace_back(p + ".mlp.fc2.weight", std::vector<std::uint64_t>{h, d});
        req.emplace_back(p + ".mlp.fc2.bias", std::vector<std::uint64_t>{d});
    }
    req.emplace_back("norm.gamma", std::vector<std::uint64_t>{d});
    req.emplace_back("norm.beta", std::vector<std::uint64_t>{d});
    return req;
}

void validate_checkpoint(const ModelConfig& cfg, const Checkpoint& ckpt) {
    const auto req = required_tensors(cfg);
    for (const auto& [name, dims] : req) {
        const auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end())
            throw ValidationError("checkpoint: missing tensor " + name);
        const NamedTensor& t = it->second;
        if (t.dims != dims) throw ValidationError("checkpoint: bad shape for " + name);
        if (t.data.size() != t.numel())
            throw ValidationError("checkpoint: data length mismatch for " + name);
        for (float v : t.data)
            if (!std::isfinite(v))
                throw ValidationError("checkpoint: non-finite value in " + name);
    }
    if (ckpt.tensors.size() != req.size())
        throw ValidationError("checkpoint: unexpected extra tensors");
}

namespace {

// mt19937 has a standard-fixed output sequence; the explicit mapping to
// floats keeps generated weights identical across platforms.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed)
        : gen_(std::uint32_t(seed ^ (seed >> 32)) ^ 0x9e3779b9u) {}

    float unit() { return float(gen_() >> 8) * (1.0f / 16777216.0f); }  // [0, 1)
    float symmetric(float scale) { return (2.0f * unit() - 1.0f) * scale; }

private:
    std::mt19937 gen_;
};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Checkpoint make_random_checkpoint(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    DetRng rng(seed);
    Checkpoint ckpt;
    for (const auto& [name, dims] : required_tensors(cfg)) {
        NamedTensor t;
        t.dims = dims;
        t.data.resize(t.numel());
        if (ends_with(name, ".gamma")) {
            for (float& v : t.data) v = 1.0f + rng.symmetric(0.1f);
        } else if (ends_with(name, ".beta") || ends_with(name, ".bias")) {
            for (float& v : t.data) v = rng.symmetric(0.01f);
        } else if (ends_with(name, ".weight")) {
            const float s = 1.0f / std::sqrt(float(dims[0]));
            for (float& v : t.data) v = rng.symmetric(s);
        } else {
            for (float& v : t.data) v = rng.symmetric(0.02f);
        }
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

Image make_random_image(int height, int width, std::uint64_t seed) {
    DetRng rng(seed);
    Image img;
    img.height = height;
    img.width = width;
    img.data.resize(std::size_t(height) * width * 3);
    for (float& v : img.data) v = rng.symmetric(1.0f);
    return img;
}

namespace {

Tensor2D matmul_weight(const Tensor2D& x, const NamedTensor& w) {
    if (w.dims.size() != 2 || std::uint64_t(x.cols()) != w.dims[0])
        throw ShapeError("matmul_weight: shape mismatch");
    Tensor2D out(x.rows(), int(w.dims[1]));
    matmul_raw(x.data(), x.rows(), x.cols(), w.data.data(), int(w.dims[1]), out.data());
    return out;
}

std::span<const float> vec(const NamedTensor& t) { return {t.data.data(), t.data.size()}; }

}  // namespace

std::pair<Tensor2D, TokenLayout> patchify(const Image& image, const ModelConfig& cfg,
                                          const Checkpoint& ckpt) {
    cfg.validate();
    const TokenLayout layout = TokenLayout::for_image(image.height, image.width,
                                                      cfg.patch_size, cfg.num_global_tokens);
    const int P = layout.patch_count();
    const int ps = cfg.patch_size;
    const int D = cfg.embed_dim;
    const int g = cfg.num_global_tokens;
    Tensor2D tokens;
    {
        Tensor2D emb;
        {
            Tensor2D patches(P, 3 * ps * ps);
            for (int pr = 0; pr < layout.grid_rows(); ++pr) {
                for (int pc = 0; pc < layout.grid_cols(); ++pc) {
                    float* dst = patches.row_ptr(pr * layout.grid_cols() + pc);
                    int o = 0;
                    for (int y = 0; y < ps; ++y)
                        for (int x = 0; x < ps; ++x)
                            for (int c = 0; c < 3; ++c)
                                dst[o++] = image.at(pr * ps + y, pc * ps + x, c);
                }
            }
            emb = matmul_weight(patches, ckpt.at("patch_embed.weight"));
            add_bias_rows(emb, vec(ckpt.at("patch_embed.bias")));
        }
        tokens = Tensor2D(layout.total(), D);
        const NamedTensor& globals = ckpt.at("global_tokens");
        for (int i = 0; i < g; ++i)
            std::copy_n(globals.data.data() + std::size_t(i) * D, D, tokens.row_ptr(i));
        for (int i = 0; i < P; ++i)
            std::copy_n(emb.row_ptr(i), D, tokens.row_ptr(g + i));
    }
    return {std::move(tokens), layout};
}

Tensor2D interpolate_pos_embed(const NamedTensor& base, int target_rows, int target_cols) {
    if (base.dims.size() != 3)
        throw ShapeError("interpolate_pos_embed: base table must be rank 3");
    if (target_rows < 1 || target_cols < 1)
        throw ValidationError("interpolate_pos_embed: target grid must be >= 1x1");
    const int br = int(base.dims[0]);
    const int bc = int(base.dims[1]);
    const int dim = int(base.dims[2]);
    Tensor2D out(target_rows * target_cols, dim);
    const auto src = [&](int r, int c) {
        return base.data.data() + (std::size_t(r) * bc + c) * dim;
    };
    for (int r = 0; r < target_rows; ++r) {
        // align-corners mapping; a 1-cell axis samples its midpoint
        const double sr = target_rows == 1 ? (br - 1) / 2.0
                                           : double(r) * (br - 1) / (target_rows - 1);
        const int r0 = int(sr);
        const int r1 = std::min(r0 + 1, br - 1);
        const double fr = sr - r0;
        for (int c = 0; c < target_cols; ++c) {
            const double sc = target_cols == 1 ? (bc - 1) / 2.0
                                               : double(c) * (bc - 1) / (target_cols - 1);
            const int c0 = int(sc);
            const int c1 = std::min(c0 + 1, bc - 1);
            const double fc = sc - c0;
            float* dst = out.row_ptr(r * target_cols + c);
            const float* v00 = src(r0, c0);
            const float* v01 = src(r0, c1);
            const float* v10 = src(r1, c0);
            const float* v11 = src(r1, c1);
            for (int k = 0; k < dim; ++k) {
                const double top = (1.0 - fc) * v00[k] + fc * v01[k];
                const double bot = (1.0 - fc) * v10[k] + fc * v11[k];
                dst[k] = float((1.0 - fr) * top + fr * bot);
            }
        }
    }
    return out;
}

Tensor2D dense_attention(std::span<const Tensor2D> q, std::span<const Tensor2D> k,
                         std::span<const Tensor2D> v) {
    if (q.empty() || q.size() != k.size() || q.size() != v.size())
        throw ShapeError("dense_attention: head count mismatch");
    const int n = q[0].rows();
    const int d = q[0].cols();
    const int heads = int(q.size());
    for (int h = 0; h < heads; ++h) {
        if (q[h].rows() != n || k[h].rows() != n || v[h].rows() != n)
            throw ShapeError("dense_attention: row counts differ");
        if (q[h].cols() != d || k[h].cols() != d || v[h].cols() != d)
            throw ShapeError("dense_attention: head dim mismatch");
    }
    const float inv_sqrt_d = 1.0f / std::sqrt(float(d));
    Tensor2D out(n, heads * d);
    for (int h = 0; h < heads; ++h) {
        Tensor2D scores = matmul_nt(q[h], k[h]);
        scale_inplace(scores, inv_sqrt_d);
        Tensor2D probs = softmax_rows(scores);
        scores = Tensor2D{};
        Tensor2D mixed = matmul(probs, v[h]);
        for (int r = 0; r < n; ++r)
            std::copy_n(mixed.row_ptr(r), d, out.row_ptr(r) + h * d);
    }
    return out;
}

void validate_mode(const ModelConfig& cfg, const RunMode& mode) {
    if (mode.attention == AttentionKind::SparseWindow && mode.window < 0)
        throw ValidationError("mode: window radius must be >= 0");
    if (mode.prune) {
        if (mode.attention != AttentionKind::SparseWindow)
            throw ValidationError("mode: pruning requires sparse attention");
        PruningPlan plan{mode.prune_ratio, mode.prune_layer, mode.score_source};
        plan.validate(cfg.depth);
    }
}

namespace {

struct PruneContext {
    std::vector<int> cur_to_orig;  // empty = identity
    std::vector<int> orig_to_cur;

    bool active() const { return !cur_to_orig.empty(); }
};

struct AttentionResult {
    Tensor2D out;
    CapturedGlobalRows captured;
    std::uint64_t pairs = 0;
};

// Baseline head loop. Each head materializes its full score matrix.
AttentionResult dense_core(const Tensor2D& qkv, const ModelConfig& cfg) {
    const int n = qkv.rows();
    const int D = cfg.embed_dim;
    const int d = cfg.head_dim();
    const float inv_sqrt_d = 1.0f / std::sqrt(float(d));
    AttentionResult res;
    res.out = Tensor2D(n, D);
    for (int h = 0; h < cfg.num_heads; ++h) {
        Tensor2D q = copy_columns(qkv, h * d, d);
        Tensor2D k = copy_columns(qkv, D + h * d, d);
        Tensor2D v = copy_columns(qkv, 2 * D + h * d, d);
        Tensor2D scores = matmul_nt(q, k);
        scale_inplace(scores, inv_sqrt_d);
        Tensor2D probs = softmax_rows(scores);
        scores = Tensor2D{};
        Tensor2D mixed = matmul(probs, v);
        for (int r = 0; r < n; ++r)
            std::copy_n(mixed.row_ptr(r), d, res.out.row_ptr(r) + h * d);
        res.pairs += std::uint64_t(n) * n;
    }
    return res;
}

// Windowed head loop over the current (possibly pruned) sequence.
// Surviving tokens keep their original grid coordinates for the window
// test; the score workspace is one sequence-length row per worker.
AttentionResult sparse_core(const Tensor2D& qkv, const ModelConfig& cfg,
                            const SparsityPattern& pattern, const PruneContext& ctx,
                            bool capture) {
    const int n = qkv.rows();
    const int D = cfg.embed_dim;
    const int d = cfg.head_dim();
    const int g = cfg.num_global_tokens;
    const float inv_sqrt_d = 1.0f / std::sqrt(float(d));
    const int workers = thread_count();
    AttentionResult res;
    res.out = Tensor2D(n, D);
    Tensor2D ws(workers, n);
    if (capture) res.captured = CapturedGlobalRows{cfg.num_heads, g, Tensor2D(cfg.num_heads * g, n)};
    std::vector<std::uint64_t> row_pairs(workers, 0);
    for (int h = 0; h < cfg.num_heads; ++h) {
        Tensor2D q = copy_columns(qkv, h * d, d);
        Tensor2D k = copy_columns(qkv, D + h * d, d);
        Tensor2D v = copy_columns(qkv, 2 * D + h * d, d);
        parallel_for(n, [&](int begin, int end, int tid) {
            std::vector<int> keys;
            keys.reserve(std::size_t(pattern.max_allowed_count()));
            for (int i = begin; i < end; ++i) {
                keys.clear();
                if (ctx.active()) {
                    pattern.for_each_allowed(ctx.cur_to_orig[i], [&](int jo) {
                        const int jc = ctx.orig_to_cur[jo];
                        if (jc >= 0) keys.push_back(jc);
                    });
                } else {
                    pattern.for_each_allowed(i, [&](int j) { keys.push_back(j); });
                }
                detail::attend_row(q.row_ptr(i), k, v, keys, inv_sqrt_d, ws.row_ptr(tid),
                                   res.out.row_ptr(i) + h * d);
                if (h == 0) row_pairs[tid] += keys.size();
                if (capture && i < g)
                    std::copy_n(ws.row_ptr(tid), n, res.captured.rows.row_ptr(h * g + i));
            }
        });
    }
    std::uint64_t total_rows = 0;
    for (auto p : row_pairs) total_rows += p;
    res.pairs = total_rows * std::uint64_t(cfg.num_heads);
    return res;
}

}  // namespace

InferenceOutput forward(const Image& image, const ModelConfig& cfg, const Checkpoint& ckpt,
                        const RunMode& mode) {
    cfg.validate();
    validate_mode(cfg, mode);
    validate_checkpoint(cfg, ckpt);
    const auto t0 = std::chrono::steady_clock::now();

    InferenceOutput out;
    AllocationMeter meter;
    std::uint64_t attn_peak = 0;
    {
        MeterScope scope(meter);
        auto [x, layout] = patchify(image, cfg, ckpt);
        const int D = cfg.embed_dim;
        const int g = cfg.num_global_tokens;
        {
            Tensor2D pos = interpolate_pos_embed(ckpt.at("pos_embed.patch"),
                                                 layout.grid_rows(), layout.grid_cols());
            for (int i = 0; i < layout.patch_count(); ++i) {
                float* row = x.row_ptr(g + i);
                const float* p = pos.row_ptr(i);
                for (int c = 0; c < D; ++c) row[c] += p[c];
            }
        }
        const NamedTensor& gpos = ckpt.at("pos_embed.global");
        for (int i = 0; i < g; ++i) {
            float* row = x.row_ptr(i);
            for (int c = 0; c < D; ++c) row[c] += gpos.data[std::size_t(i) * D + c];
        }

        const SparsityPattern pattern(layout, mode.attention == AttentionKind::SparseWindow
                                                  ? mode.window
                                                  : 0);
        const PruningPlan plan{mode.prune_ratio, mode.prune_layer, mode.score_source};
        PruneContext ctx;

        for (int layer = 1; layer <= cfg.depth; ++layer) {
            out.per_layer_token_counts.push_back(x.rows());
            const std::string pfx = "blocks." + std::to_string(layer - 1);
            const bool capture_now = mode.prune && layer == plan.layer;

            Tensor2D qkv;
            {
                Tensor2D xn = layernorm_rows(x, vec(ckpt.at(pfx + ".norm1.gamma")),
                                             vec(ckpt.at(pfx + ".norm1.beta")),
                                             cfg.layernorm_eps);
                qkv = matmul_weight(xn, ckpt.at(pfx + ".attn.qkv.weight"));
                add_bias_rows(qkv, vec(ckpt.at(pfx + ".attn.qkv.bias")));
            }
            meter.phase_begin();
            AttentionResult attn = mode.attention == AttentionKind::Dense
                                       ? dense_core(qkv, cfg)
                                       : sparse_core(qkv, cfg, pattern, ctx, capture_now);
            attn_peak = std::max(attn_peak, meter.phase_end());
            qkv = Tensor2D{};
            out.per_layer_attention_pairs.push_back(attn.pairs);

            ImportanceScores scores;
            if (capture_now) {
                scores = importance_scores(attn.captured, plan);
                attn.captured.rows = Tensor2D{};
            }

            Tensor2D proj = matmul_weight(attn.out, ckpt.at(pfx + ".attn.proj.weight"));
            add_bias_rows(proj, vec(ckpt.at(pfx + ".attn.proj.bias")));
            attn.out = Tensor2D{};
            add_inplace(x, proj);
            proj = Tensor2D{};

            Tensor2D h2;
            {
                Tensor2D h1;
                {
                    Tensor2D xn2 = layernorm_rows(x, vec(ckpt.at(pfx + ".norm2.gamma")),
                                                  vec(ckpt.at(pfx + ".norm2.beta")),
                                                  cfg.layernorm_eps);
                    h1 = matmul_weight(xn2, ckpt.at(pfx + ".mlp.fc1.weight"));
                    add_bias_rows(h1, vec(ckpt.at(pfx + ".mlp.fc1.bias")));
                }
                gelu_inplace(h1);
                h2 = matmul_weight(h1, ckpt.at(pfx + ".mlp.fc2.weight"));
                add_bias_rows(h2, vec(ckpt.at(pfx + ".mlp.fc2.bias")));
            }
            add_inplace(x, h2);
            h2 = Tensor2D{};

            if (capture_now) {
                PruneResult pr = prune_tokens(x, scores, plan, g);
                x = std::move(pr.reduced);
                ctx.cur_to_orig = pr.kept;
                ctx.orig_to_cur.assign(std::size_t(layout.total()), -1);
                for (std::size_t t = 0; t < pr.kept.size(); ++t)
                    ctx.orig_to_cur[std::size_t(pr.kept[t])] = int(t);
                out.surviving_token_indices = std::move(pr.kept);
            }
        }

        if (out.surviving_token_indices.empty()) {
            out.surviving_token_indices.resize(std::size_t(layout.total()));
            std::iota(out.surviving_token_indices.begin(),
                      out.surviving_token_indices.end(), 0);
        }
        {
            Tensor2D xn = layernorm_rows(x, vec(ckpt.at("norm.gamma")),
                                         vec(ckpt.at("norm.beta")), cfg.layernorm_eps);
            out.cls_embedding.assign(xn.row_ptr(0), xn.row_ptr(0) + D);
        }
    }
    out.peak_bytes = meter.peak_bytes();
    out.attention_peak_bytes = attn_peak;
    out.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace sparsevit
