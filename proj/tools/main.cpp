// Command-line surface: feature extraction, resolution/window/ratio
// sweeps, mask and prune-map exports, checkpoint generation, and KNN
// evaluation. Exit code 0 only when every requested output was written.

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsevit/bench.hpp"
#include "sparsevit/cost.hpp"
#include "sparsevit/errors.hpp"
#include "sparsevit/eval.hpp"
#include "sparsevit/io.hpp"
#include "sparsevit/model.hpp"
#include "sparsevit/prune.hpp"
#include "sparsevit/sparse.hpp"

namespace sv = sparsevit;

namespace {

struct ModeFlags {
    std::string mode = "vanilla";
    int window = 8;
    float prune_ratio = 0.6f;
    int prune_layer = 4;

    void attach(CLI::App* cmd) {
        cmd->add_option("--mode", mode, "vanilla|sparse|sparse-prune")
            ->check(CLI::IsMember({"vanilla", "sparse", "sparse-prune"}));
        cmd->add_option("--window", window, "window radius in patch units");
        cmd->add_option("--prune-ratio", prune_ratio, "pruned proportion of patch tokens");
        cmd->add_option("--prune-layer", prune_layer, "1-based layer pruned after");
    }

    sv::RunMode resolve() const {
        return sv::parse_mode(mode, window, prune_ratio, prune_layer);
    }
};

sv::ModelConfig load_config_or_default(const std::string& path) {
    return path.empty() ? sv::ModelConfig::desk_default() : sv::load_config(path);
}

std::array<float, 3> parse_triple(const std::string& text, const char* what) {
    std::array<float, 3> out{};
    std::stringstream ss(text);
    std::string field;
    std::vector<float> vals;
    while (std::getline(ss, field, ','))
        vals.push_back(std::stof(field));
    if (vals.size() == 1) return {vals[0], vals[0], vals[0]};
    if (vals.size() == 3) {
        std::copy(vals.begin(), vals.end(), out.begin());
        return out;
    }
    throw sv::ValidationError(std::string(what) + ": expected one value or r,g,b");
}

std::vector<int> read_label_file(const std::string& path, std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw sv::IoError("cannot open " + path);
    std::vector<int> labels;
    int v;
    while (in >> v) labels.push_back(v);
    if (labels.size() != expected)
        throw sv::ValidationError("label count " + std::to_string(labels.size()) +
                                  " does not match image count " + std::to_string(expected));
    return labels;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_extract(const std::string& config_path, const std::string& checkpoint_path,
                const ModeFlags& flags, const std::vector<std::string>& images,
                const std::string& out_path, const std::string& labels_path,
                const std::string& mean_text, const std::string& std_text) {
    const sv::ModelConfig cfg = load_config_or_default(config_path);
    const sv::Checkpoint ckpt = sv::load_checkpoint(checkpoint_path);
    sv::validate_checkpoint(cfg, ckpt);
    const sv::RunMode mode = flags.resolve();
    const auto mean = parse_triple(mean_text, "--mean");
    const auto std_dev = parse_triple(std_text, "--std");
    std::vector<int> labels(images.size(), 0);
    if (!labels_path.empty()) labels = read_label_file(labels_path, images.size());

    sv::FeatureSet features;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const sv::Image img = sv::normalize_image(sv::read_ppm(images[i]), mean, std_dev);
        const sv::InferenceOutput out = sv::forward(img, cfg, ckpt, mode);
        features.push(out.cls_embedding, labels[i], images[i]);
    }
    if (ends_with(out_path, ".csv"))
        sv::save_features_csv(out_path, features);
    else
        sv::save_features(out_path, features);
    std::cout << "wrote " << features.count() << " feature rows (dim " << features.dim
              << ") to " << out_path << "\n";
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& checkpoint_path,
              const sv::SweepSpec& spec, const std::string& out_path) {
    const sv::ModelConfig cfg = load_config_or_default(config_path);
    const sv::Checkpoint ckpt = sv::load_checkpoint(checkpoint_path);
    sv::validate_checkpoint(cfg, ckpt);
    const auto records = sv::run_sweep(cfg, ckpt, spec);
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw sv::IoError("cannot open " + out_path + " for writing");
    sv::write_bench_csv(out, records);
    if (!out.good()) throw sv::IoError("write failure on " + out_path);
    std::cout << "wrote " << records.size() << " sweep rows to " << out_path << "\n";
    return 0;
}

int cmd_export_mask(int grid_rows, int grid_cols, int num_global, int window, int cap,
                    const std::string& out_path) {
    const sv::TokenLayout layout(grid_rows, grid_cols, num_global);
    const sv::SparsityPattern pattern(layout, window);
    const sv::MaskExport mask = sv::export_mask(pattern, cap);
    sv::write_mask_pgm(out_path, mask);
    std::cout << "wrote " << mask.n << "x" << mask.n << " mask (" << mask.popcount()
              << " allowed pairs) to " << out_path << "\n";
    return 0;
}

int cmd_export_prunemap(const std::string& config_path, const std::string& checkpoint_path,
                        const ModeFlags& flags, const std::string& image_path,
                        const std::string& out_prefix, const std::string& mean_text,
                        const std::string& std_text) {
    const sv::ModelConfig cfg = load_config_or_default(config_path);
    const sv::Checkpoint ckpt = sv::load_checkpoint(checkpoint_path);
    sv::validate_checkpoint(cfg, ckpt);
    sv::RunMode mode = flags.resolve();
    if (!mode.prune)
        mode = sv::RunMode::sparse_prune(flags.window, flags.prune_ratio, flags.prune_layer);
    const sv::Image img = sv::normalize_image(sv::read_ppm(image_path),
                                              parse_triple(mean_text, "--mean"),
                                              parse_triple(std_text, "--std"));
    const sv::InferenceOutput out = sv::forward(img, cfg, ckpt, mode);
    const sv::TokenLayout layout = sv::TokenLayout::for_image(
        img.height, img.width, cfg.patch_size, cfg.num_global_tokens);
    const sv::PruneMap map =
        sv::prune_map(out.surviving_token_indices, layout, cfg.patch_size);
    sv::write_prunemap_csv(out_prefix + ".csv", map);
    sv::write_prunemap_pgm(out_prefix + ".pgm", map);
    std::cout << "pruned " << map.pruned_count() << " of " << layout.patch_count()
              << " patches; wrote " << out_prefix << ".csv and " << out_prefix << ".pgm\n";
    return 0;
}

int cmd_knn(const std::string& train_path, const std::string& test_path, int k,
            const std::string& out_path) {
    const auto load = [](const std::string& p) {
        return ends_with(p, ".csv") ? sv::load_features_csv(p) : sv::load_features(p);
    };
    const sv::FeatureSet train = load(train_path);
    const sv::FeatureSet test = load(test_path);
    if (train.dim != test.dim)
        throw sv::ValidationError("train/test feature dimensions differ");
    std::vector<int> predictions(test.count());
    int num_classes = 1;
    for (int label : train.labels) num_classes = std::max(num_classes, label + 1);
    for (int label : test.labels) num_classes = std::max(num_classes, label + 1);
    for (int i = 0; i < test.count(); ++i)
        predictions[i] = sv::knn_classify(train, test.row(i), k);
    const sv::Metrics m = sv::compute_metrics(predictions, test.labels, num_classes);

    std::ostringstream report;
    char buf[64];
    report << "k: " << k << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", m.accuracy);
    report << "accuracy: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", m.balanced_accuracy);
    report << "balanced_accuracy: " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.6f", m.weighted_f1);
    report << "weighted_f1: " << buf << "\n";
    std::cout << report.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw sv::IoError("cannot open " + out_path + " for writing");
        out << report.str();
        if (!out.good()) throw sv::IoError("write failure on " + out_path);
    }
    return 0;
}

int cmd_predict(const std::string& config_path, const ModeFlags& flags,
                const std::vector<int>& resolutions, const std::string& out_path,
                std::uint64_t budget) {
    const sv::ModelConfig cfg = load_config_or_default(config_path);
    const sv::RunMode mode = flags.resolve();
    std::vector<sv::CostReport> reports;
    for (int res : resolutions) {
        reports.push_back(sv::predict(cfg, res, mode));
        std::cout << sv::cost_report_text(reports.back());
    }
    if (budget != 0) {
        const int best = sv::max_resolution_under_budget(cfg, mode, budget);
        std::cout << "max resolution under " << budget << " bytes: " << best << "\n";
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw sv::IoError("cannot open " + out_path + " for writing");
        sv::write_cost_report_csv(out, reports);
        if (!out.good()) throw sv::IoError("write failure on " + out_path);
    }
    return 0;
}

int cmd_make_checkpoint(const std::string& config_path, std::uint64_t seed,
                        const std::string& out_path, const std::string& config_out) {
    const sv::ModelConfig cfg = load_config_or_default(config_path);
    const sv::Checkpoint ckpt = sv::make_random_checkpoint(cfg, seed);
    sv::save_checkpoint(out_path, ckpt);
    if (!config_out.empty()) sv::save_config(config_out, cfg);
    std::cout << "wrote checkpoint (" << ckpt.tensors.size() << " tensors, "
              << ckpt.payload_bytes() << " payload bytes) to " << out_path << "\n";
    return 0;
}

int cmd_make_image(int width, int height, std::uint64_t seed, const std::string& out_path) {
    if (width < 1 || height < 1)
        throw sv::ValidationError("make-image: dimensions must be >= 1");
    std::mt19937 gen(std::uint32_t(seed ^ (seed >> 32)) ^ 0x9e3779b9u);
    sv::ByteImage img;
    img.width = width;
    img.height = height;
    img.rgb.resize(std::size_t(width) * height * 3);
    for (auto& v : img.rgb) v = std::uint8_t(gen() >> 24);
    sv::write_ppm(out_path, img);
    std::cout << "wrote " << width << "x" << height << " image to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"high-resolution ViT inference engine with windowed sparse attention "
                 "and attention-score token pruning"};
    app.require_subcommand(1);

    // extract
    auto* extract = app.add_subcommand("extract", "run inference and write feature rows");
    std::string ex_config, ex_ckpt, ex_out, ex_labels;
    std::string ex_mean = "0.5", ex_std = "0.5";
    std::vector<std::string> ex_images;
    ModeFlags ex_flags;
    extract->add_option("--config", ex_config, "config file (key=value)");
    extract->add_option("--checkpoint", ex_ckpt, "checkpoint file")->required();
    ex_flags.attach(extract);
    extract->add_option("--out", ex_out, "output feature file (.csv for text)")->required();
    extract->add_option("--labels", ex_labels, "text file with one label per image");
    extract->add_option("--mean", ex_mean, "channel mean (one value or r,g,b)");
    extract->add_option("--std", ex_std, "channel std (one value or r,g,b)");
    extract->add_option("images", ex_images, "input images (binary PPM)")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "sweep resolutions/modes and write a CSV");
    std::string be_config, be_ckpt, be_out;
    sv::SweepSpec be_spec;
    bench->add_option("--config", be_config, "config file");
    bench->add_option("--checkpoint", be_ckpt, "checkpoint file")->required();
    bench->add_option("--out", be_out, "output CSV path")->required();
    bench->add_option("--resolutions", be_spec.resolutions, "square resolutions to sweep");
    bench->add_option("--modes", be_spec.modes, "modes to sweep");
    bench->add_option("--windows", be_spec.windows, "window radii for sparse modes");
    bench->add_option("--prune-ratios", be_spec.prune_ratios, "ratios for sparse-prune");
    bench->add_option("--prune-layer", be_spec.prune_layer, "1-based pruning layer");
    bench->add_option("--reps", be_spec.repetitions, "repetitions per point (median time)");
    bench->add_option("--seed", be_spec.seed, "seed for the synthetic images");
    bench->add_option("--mem-budget", be_spec.mem_budget_bytes,
                      "byte budget; points predicted above it emit status=oom");

    // export-mask
    auto* mask = app.add_subcommand("export-mask", "write a sparsity mask as PGM");
    int mk_rows = 16, mk_cols = 16, mk_global = 1, mk_window = 8, mk_cap = 4096;
    std::string mk_out;
    mask->add_option("--grid-rows", mk_rows, "patch grid rows");
    mask->add_option("--grid-cols", mk_cols, "patch grid cols");
    mask->add_option("--num-global", mk_global, "global token count");
    mask->add_option("--window", mk_window, "window radius");
    mask->add_option("--cap", mk_cap, "max token count for dense export");
    mask->add_option("--out", mk_out, "output PGM path")->required();

    // export-prunemap
    auto* pmap = app.add_subcommand("export-prunemap",
                                    "run pruned inference and export the pruned-patch map");
    std::string pm_config, pm_ckpt, pm_image, pm_out;
    std::string pm_mean = "0.5", pm_std = "0.5";
    ModeFlags pm_flags;
    pm_flags.mode = "sparse-prune";
    pmap->add_option("--config", pm_config, "config file");
    pmap->add_option("--checkpoint", pm_ckpt, "checkpoint file")->required();
    pmap->add_option("--image", pm_image, "input image (binary PPM)")->required();
    pm_flags.attach(pmap);
    pmap->add_option("--out", pm_out, "output prefix (.csv and .pgm appended)")->required();
    pmap->add_option("--mean", pm_mean, "channel mean");
    pmap->add_option("--std", pm_std, "channel std");

    // knn
    auto* knn = app.add_subcommand("knn", "k-nearest-neighbor evaluation of feature files");
    std::string kn_train, kn_test, kn_out;
    int kn_k = 20;
    knn->add_option("--train", kn_train, "train feature file")->required();
    knn->add_option("--test", kn_test, "test feature file")->required();
    knn->add_option("--k", kn_k, "neighbor count");
    knn->add_option("--out", kn_out, "also write the report to this path");

    // predict
    auto* pred = app.add_subcommand("predict",
                                    "analytic memory/cell/flops predictions per resolution");
    std::string pr_config, pr_out;
    std::vector<int> pr_resolutions{224};
    std::uint64_t pr_budget = 0;
    ModeFlags pr_flags;
    pred->add_option("--config", pr_config, "config file");
    pr_flags.attach(pred);
    pred->add_option("--resolutions", pr_resolutions, "square resolutions to analyze");
    pred->add_option("--out", pr_out, "also write the reports as CSV");
    pred->add_option("--budget", pr_budget,
                     "report the largest resolution fitting this byte budget");

    // make-checkpoint
    auto* mkck = app.add_subcommand("make-checkpoint",
                                    "write a randomly initialized checkpoint");
    std::string mc_config, mc_out, mc_config_out;
    std::uint64_t mc_seed = 0;
    mkck->add_option("--config", mc_config, "config file (defaults to the desk-scale model)");
    mkck->add_option("--seed", mc_seed, "rng seed");
    mkck->add_option("--out", mc_out, "output checkpoint path")->required();
    mkck->add_option("--write-config", mc_config_out, "also write the resolved config");

    // make-image
    auto* mkim = app.add_subcommand("make-image", "write a deterministic random PPM");
    int mi_width = 224, mi_height = 224;
    std::uint64_t mi_seed = 0;
    std::string mi_out;
    mkim->add_option("--width", mi_width, "image width");
    mkim->add_option("--height", mi_height, "image height");
    mkim->add_option("--seed", mi_seed, "rng seed");
    mkim->add_option("--out", mi_out, "output PPM path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*extract)
            return cmd_extract(ex_config, ex_ckpt, ex_flags, ex_images, ex_out, ex_labels,
                               ex_mean, ex_std);
        if (*bench) return cmd_bench(be_config, be_ckpt, be_spec, be_out);
        if (*mask)
            return cmd_export_mask(mk_rows, mk_cols, mk_global, mk_window, mk_cap, mk_out);
        if (*pmap)
            return cmd_export_prunemap(pm_config, pm_ckpt, pm_flags, pm_image, pm_out,
                                       pm_mean, pm_std);
        if (*knn) return cmd_knn(kn_train, kn_test, kn_k, kn_out);
        if (*pred) return cmd_predict(pr_config, pr_flags, pr_resolutions, pr_out, pr_budget);
        if (*mkck) return cmd_make_checkpoint(mc_config, mc_seed, mc_out, mc_config_out);
        if (*mkim) return cmd_make_image(mi_width, mi_height, mi_seed, mi_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
