#include "sparsevit/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "sparsevit/cost.hpp"
#include "sparsevit/errors.hpp"

namespace sparsevit {

void SweepSpec::validate() const {
    if (resolutions.empty() || modes.empty() || windows.empty() || prune_ratios.empty())
        throw ValidationError("sweep: lists must be non-empty");
    if (repetitions < 1) throw ValidationError("sweep: repetitions must be >= 1");
    for (const std::string& m : modes)
        if (m != "vanilla" && m != "sparse" && m != "sparse-prune")
            throw ValidationError("sweep: unknown mode " + m);
}

RunMode parse_mode(const std::string& name, int window, float prune_ratio, int prune_layer) {
    if (name == "vanilla") return RunMode::vanilla();
    if (name == "sparse") return RunMode::sparse(window);
    if (name == "sparse-prune") return RunMode::sparse_prune(window, prune_ratio, prune_layer);
    throw ValidationError("unknown mode " + name + " (use vanilla|sparse|sparse-prune)");
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

struct SweepPoint {
    std::string mode;
    int window = 0;
    float ratio = 0.0f;
    int layer = 0;
};

}  // namespace

std::vector<BenchRecord> run_sweep(const ModelConfig& cfg, const Checkpoint& ckpt,
                                   const SweepSpec& spec) {
    cfg.validate();
    spec.validate();
    std::vector<SweepPoint> points;
    for (const std::string& m : spec.modes) {
        if (m == "vanilla") {
            points.push_back({m, 0, 0.0f, 0});
        } else if (m == "sparse") {
            for (int w : spec.windows) points.push_back({m, w, 0.0f, 0});
        } else {
            for (int w : spec.windows)
                for (float p : spec.prune_ratios)
                    points.push_back({m, w, p, spec.prune_layer});
        }
    }

    std::vector<BenchRecord> records;
    for (int res : spec.resolutions) {
        const Image image =
            make_random_image(res, res, spec.seed ^ (std::uint64_t(res) * 0x9e3779b97f4a7c15ull));
        for (const SweepPoint& pt : points) {
            const RunMode mode = parse_mode(pt.mode, pt.window, pt.ratio, pt.layer);
            const CostReport cost = predict(cfg, res, mode);

            BenchRecord rec;
            rec.resolution = res;
            rec.mode = pt.mode;
            rec.window = pt.window;
            rec.prune_ratio = pt.ratio;
            rec.prune_layer = pt.layer;
            rec.token_count = cost.tokens_before;
            rec.predicted_cells = cost.total_cells;
            rec.run_seed = spec.seed;
            rec.predicted_attn_peak_bytes = cost.predicted_attention_peak_bytes;
            rec.predicted_peak_bytes = cost.predicted_peak_bytes;

            if (spec.mem_budget_bytes != 0 &&
                predicted_total_bytes(cost) > spec.mem_budget_bytes) {
                rec.status = "oom";
                records.push_back(std::move(rec));
                continue;
            }

            std::vector<double> times;
            times.reserve(spec.repetitions);
            InferenceOutput last;
            for (int r = 0; r < spec.repetitions; ++r) {
                last = forward(image, cfg, ckpt, mode);
                times.push_back(last.wall_time_seconds);
            }
            rec.wall_time_seconds = median(std::move(times));
            rec.accounted_peak_bytes = last.peak_bytes;
            rec.attn_peak_bytes = last.attention_peak_bytes;
            rec.status = "ok";
            records.push_back(std::move(rec));
        }
    }
    return records;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRecord> records) {
    out << "resolution,mode,window,prune_ratio,prune_layer,token_count,"
           "wall_time_seconds,accounted_peak_bytes,predicted_cells,run_seed,status,"
           "attn_peak_bytes,predicted_attn_peak_bytes,predicted_peak_bytes\n";
    char buf[64];
    for (const BenchRecord& r : records) {
        out << r.resolution << ',' << r.mode << ',' << r.window << ',';
        std::snprintf(buf, sizeof buf, "%.9g", double(r.prune_ratio));
        out << buf << ',' << r.prune_layer << ',' << r.token_count << ',';
        std::snprintf(buf, sizeof buf, "%.6f", r.wall_time_seconds);
        out << buf << ',' << r.accounted_peak_bytes << ',' << r.predicted_cells << ','
            << r.run_seed << ',' << r.status << ',' << r.attn_peak_bytes << ','
            << r.predicted_attn_peak_bytes << ',' << r.predicted_peak_bytes << '\n';
    }
}

}  // namespace sparsevit
