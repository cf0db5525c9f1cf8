#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "sparsevit/errors.hpp"
#include "sparsevit/io.hpp"

using namespace sparsevit;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() : path(std::filesystem::temp_directory_path() / "sparsevit_io_tests") {
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("checkpoint files round-trip bit-exactly") {
    TempDir tmp;
    const ModelConfig cfg = ModelConfig::desk_default();
    const Checkpoint ckpt = make_random_checkpoint(cfg, 11);
    const std::string p1 = tmp.file("a.ckpt");
    const std::string p2 = tmp.file("b.ckpt");
    save_checkpoint(p1, ckpt);
    const Checkpoint loaded = load_checkpoint(p1);
    CHECK(loaded.tensors.size() == ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
        const NamedTensor& l = loaded.at(name);
        CHECK(l.dims == t.dims);
        CHECK(l.data == t.data);  // bitwise float equality
    }
    validate_checkpoint(cfg, loaded);
    save_checkpoint(p2, loaded);
    CHECK(slurp(p1) == slurp(p2));

    const std::string head = slurp(p1).substr(0, 8);
    CHECK(head == "VITCKPT1");
}

TEST_CASE("checkpoint loader rejects bad magic and truncation") {
    TempDir tmp;
    const std::string path = tmp.file("bad.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC" << std::string(16, '\0');
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);

    const Checkpoint ckpt = make_random_checkpoint(ModelConfig::desk_default(), 1);
    const std::string good = tmp.file("good.ckpt");
    save_checkpoint(good, ckpt);
    const std::string bytes = slurp(good);
    const std::string cut = tmp.file("cut.ckpt");
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_checkpoint(cut), IoError);
    CHECK_THROWS_AS(load_checkpoint(tmp.file("missing.ckpt")), IoError);
}

TEST_CASE("config files round-trip and reject unknown keys") {
    TempDir tmp;
    ModelConfig cfg = ModelConfig::desk_default();
    cfg.embed_dim = 96;
    cfg.depth = 5;
    cfg.mlp_ratio = 3.5f;
    const std::string path = tmp.file("model.cfg");
    save_config(path, cfg);
    const ModelConfig loaded = load_config(path);
    CHECK(loaded.embed_dim == 96);
    CHECK(loaded.depth == 5);
    CHECK(loaded.mlp_ratio == 3.5f);
    CHECK(loaded.patch_size == cfg.patch_size);
    CHECK(loaded.layernorm_eps == cfg.layernorm_eps);

    const std::string bad = tmp.file("bad.cfg");
    {
        std::ofstream out(bad);
        out << "embed_dim=64\nwhatever=3\n";
    }
    CHECK_THROWS_AS(load_config(bad), ValidationError);

    const std::string comments = tmp.file("comments.cfg");
    {
        std::ofstream out(comments);
        out << "# a comment\n  depth = 2  # trailing\n\n";
    }
    CHECK(load_config(comments).depth == 2);
}

TEST_CASE("ppm round-trip, comments, and validation") {
    TempDir tmp;
    std::mt19937 gen(5);
    ByteImage img;
    img.width = 6;
    img.height = 4;
    img.rgb.resize(6 * 4 * 3);
    for (auto& v : img.rgb) v = std::uint8_t(gen());
    const std::string path = tmp.file("img.ppm");
    write_ppm(path, img);
    const ByteImage back = read_ppm(path);
    CHECK(back.width == 6);
    CHECK(back.height == 4);
    CHECK(back.rgb == img.rgb);

    const std::string commented = tmp.file("commented.ppm");
    {
        std::ofstream out(commented, std::ios::binary);
        out << "P6\n# a viewer comment\n2 1\n255\n";
        out.write("\x01\x02\x03\x04\x05\x06", 6);
    }
    const ByteImage c = read_ppm(commented);
    CHECK(c.width == 2);
    CHECK(c.rgb[3] == 4);

    const std::string wide = tmp.file("wide.ppm");
    {
        std::ofstream out(wide, std::ios::binary);
        out << "P6\n2 1\n65535\n";
        out.write("\x01\x02\x03\x04\x05\x06", 6);
    }
    CHECK_THROWS_AS(read_ppm(wide), IoError);
}

TEST_CASE("image normalization") {
    ByteImage img;
    img.width = 1;
    img.height = 1;
    img.rgb = {255, 0, 127};
    const Image norm = normalize_image(img, {0.5f, 0.5f, 0.5f}, {0.5f, 0.5f, 0.5f});
    CHECK(norm.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(norm.at(0, 0, 1) == doctest::Approx(-1.0));
    CHECK(norm.at(0, 0, 2) == doctest::Approx(-0.00392157).epsilon(1e-4));
    CHECK_THROWS_AS(normalize_image(img, {0.5f, 0.5f, 0.5f}, {0.0f, 1.0f, 1.0f}),
                    ValidationError);
}

TEST_CASE("pgm round-trip") {
    TempDir tmp;
    GrayImage img;
    img.width = 3;
    img.height = 2;
    img.pixels = {0, 255, 7, 9, 128, 64};
    const std::string path = tmp.file("img.pgm");
    write_pgm(path, img);
    const GrayImage back = read_pgm(path);
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.pixels == img.pixels);
}

TEST_CASE("feature files round-trip in binary and csv") {
    TempDir tmp;
    std::mt19937 gen(6);
    FeatureSet fs;
    std::vector<float> row(5);
    for (int i = 0; i < 7; ++i) {
        for (float& v : row) v = float(gen() >> 8) * (2.0f / 16777216.0f) - 1.0f;
        fs.push(row, i % 3, "sample" + std::to_string(i));
    }
    const std::string bin = tmp.file("f.feats");
    save_features(bin, fs);
    const FeatureSet back = load_features(bin);
    CHECK(back.count() == 7);
    CHECK(back.dim == 5);
    CHECK(back.labels == fs.labels);
    CHECK(back.data == fs.data);  // bitwise
    CHECK(slurp(bin).substr(0, 6) == "FEATS1");

    const std::string csv = tmp.file("f.csv");
    save_features_csv(csv, fs);
    const FeatureSet csv_back = load_features_csv(csv);
    CHECK(csv_back.labels == fs.labels);
    CHECK(csv_back.data == fs.data);  // %.9g round-trips floats

    FeatureSet negative;
    negative.push(std::vector<float>{1.0f}, -1);
    CHECK_THROWS_AS(save_features(tmp.file("neg.feats"), negative), IoError);

    const std::string corrupt = tmp.file("corrupt.feats");
    {
        std::ofstream out(corrupt, std::ios::binary);
        out << "NOPE!!" << std::string(8, '\0');
    }
    CHECK_THROWS_AS(load_features(corrupt), IoError);
}

TEST_CASE("prune map round-trips through csv and pgm") {
    TempDir tmp;
    PruneMap map;
    map.grid_rows = 3;
    map.grid_cols = 4;
    map.patch_size = 14;
    map.pruned = {1, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1, 1};
    const std::string p1 = tmp.file("map.csv");
    const std::string p2 = tmp.file("map2.csv");
    write_prunemap_csv(p1, map);
    const PruneMap back = read_prunemap_csv(p1, 14);
    CHECK(back.grid_rows == 3);
    CHECK(back.grid_cols == 4);
    CHECK(back.pruned == map.pruned);
    write_prunemap_csv(p2, back);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(slurp(p1).substr(0, 15) == "row,col,pruned\n");

    const std::string pgm = tmp.file("map.pgm");
    write_prunemap_pgm(pgm, map);
    const GrayImage img = read_pgm(pgm);
    CHECK(img.width == 4);
    CHECK(img.height == 3);
    for (std::size_t i = 0; i < map.pruned.size(); ++i)
        CHECK(img.pixels[i] == (map.pruned[i] ? 0 : 255));
}

TEST_CASE("mask pgm export uses 255 for allowed pairs") {
    TempDir tmp;
    MaskExport mask;
    mask.n = 2;
    mask.allowed = {1, 0, 0, 1};
    const std::string path = tmp.file("mask.pgm");
    write_mask_pgm(path, mask);
    const GrayImage img = read_pgm(path);
    CHECK(img.pixels == std::vector<std::uint8_t>{255, 0, 0, 255});
}
