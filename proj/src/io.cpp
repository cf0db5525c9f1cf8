#include "sparsevit/io.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sparsevit/errors.hpp"

namespace sparsevit {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (!in.good() && !in.eof()) throw IoError("read failure on " + path);
    return std::move(buf).str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out.good()) throw IoError("write failure on " + path);
}

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(char(v & 0xff));
    buf.push_back(char((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    std::string name;  // for error messages

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IoError(name + ": truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return std::uint8_t(buf[pos++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = std::uint16_t(std::uint8_t(buf[pos])) |
                          std::uint16_t(std::uint8_t(buf[pos + 1])) << 8;
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

constexpr char kCheckpointMagic[] = "VITCKPT1";
constexpr char kFeatureMagic[] = "FEATS1";

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string buf;
    buf.append(kCheckpointMagic, 8);
    put_u32(buf, std::uint32_t(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.size() > 0xffff) throw IoError("tensor name too long: " + name);
        if (t.dims.size() > 0xff) throw IoError("tensor rank too large: " + name);
        if (t.data.size() != t.numel())
            throw IoError("tensor data does not match dims: " + name);
        put_u16(buf, std::uint16_t(name.size()));
        buf.append(name);
        buf.push_back(char(t.dims.size()));
        for (auto d : t.dims) put_u64(buf, d);
        for (float v : t.data) put_f32(buf, v);
    }
    write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    if (r.bytes(8) != std::string(kCheckpointMagic, 8))
        throw IoError(path + ": bad checkpoint magic");
    const std::uint32_t count = r.u32();
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        const std::string name = r.bytes(name_len);
        const std::uint8_t rank = r.u8();
        NamedTensor t;
        t.dims.resize(rank);
        for (auto& d : t.dims) d = r.u64();
        const std::uint64_t numel = t.numel();
        if (numel > (1ull << 32)) throw IoError(path + ": tensor too large: " + name);
        t.data.resize(numel);
        for (auto& v : t.data) v = r.f32();
        if (!ckpt.tensors.emplace(name, std::move(t)).second)
            throw IoError(path + ": duplicate tensor " + name);
    }
    return ckpt;
}

void save_config(const std::string& path, const ModelConfig& cfg) {
    std::ostringstream out;
    out << "patch_size=" << cfg.patch_size << "\n";
    out << "embed_dim=" << cfg.embed_dim << "\n";
    out << "depth=" << cfg.depth << "\n";
    out << "num_heads=" << cfg.num_heads << "\n";
    char fbuf[64];
    std::snprintf(fbuf, sizeof fbuf, "%.9g", double(cfg.mlp_ratio));
    out << "mlp_ratio=" << fbuf << "\n";
    out << "num_global_tokens=" << cfg.num_global_tokens << "\n";
    out << "base_grid_rows=" << cfg.base_grid_rows << "\n";
    out << "base_grid_cols=" << cfg.base_grid_cols << "\n";
    std::snprintf(fbuf, sizeof fbuf, "%.9g", double(cfg.layernorm_eps));
    out << "layernorm_eps=" << fbuf << "\n";
    write_file(path, out.str());
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(std::uint8_t(s[b]))) ++b;
    while (e > b && std::isspace(std::uint8_t(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const int r = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ValidationError("config: bad integer for " + key + ": " + v);
    }
}

float parse_float(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const float r = std::stof(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ValidationError("config: bad number for " + key + ": " + v);
    }
}

}  // namespace

ModelConfig load_config(const std::string& path) {
    std::istringstream in(read_file(path));
    ModelConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "patch_size")
            cfg.patch_size = parse_int(value, key);
        else if (key == "embed_dim")
            cfg.embed_dim = parse_int(value, key);
        else if (key == "depth")
            cfg.depth = parse_int(value, key);
        else if (key == "num_heads")
            cfg.num_heads = parse_int(value, key);
        else if (key == "mlp_ratio")
            cfg.mlp_ratio = parse_float(value, key);
        else if (key == "num_global_tokens")
            cfg.num_global_tokens = parse_int(value, key);
        else if (key == "base_grid_rows")
            cfg.base_grid_rows = parse_int(value, key);
        else if (key == "base_grid_cols")
            cfg.base_grid_cols = parse_int(value, key);
        else if (key == "layernorm_eps")
            cfg.layernorm_eps = parse_float(value, key);
        else
            throw ValidationError(path + ": unknown config key " + key);
    }
    cfg.validate();
    return cfg;
}

namespace {

// Reads one whitespace-delimited PNM header token, skipping comments.
std::string pnm_token(Reader& r) {
    std::string tok;
    while (true) {
        r.need(1);
        const char c = r.buf[r.pos];
        if (c == '#') {
            while (r.pos < r.buf.size() && r.buf[r.pos] != '\n') ++r.pos;
            continue;
        }
        if (std::isspace(std::uint8_t(c))) {
            ++r.pos;
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
        ++r.pos;
    }
}

int pnm_int(Reader& r, const char* what) {
    const std::string tok = pnm_token(r);
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw IoError(r.name + ": bad " + what + " in header");
    }
}

}  // namespace

ByteImage read_ppm(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    if (pnm_token(r) != "P6") throw IoError(path + ": not a binary PPM (P6)");
    ByteImage img;
    img.width = pnm_int(r, "width");
    img.height = pnm_int(r, "height");
    const int maxval = pnm_int(r, "maxval");
    if (img.width < 1 || img.height < 1) throw IoError(path + ": bad dimensions");
    if (maxval != 255) throw IoError(path + ": only maxval 255 is supported");
    const std::size_t n = std::size_t(img.width) * img.height * 3;
    r.need(n);
    img.rgb.assign(buf.begin() + std::ptrdiff_t(r.pos), buf.begin() + std::ptrdiff_t(r.pos + n));
    return img;
}

void write_ppm(const std::string& path, const ByteImage& image) {
    if (image.rgb.size() != std::size_t(image.width) * image.height * 3)
        throw IoError("write_ppm: pixel buffer does not match dimensions");
    std::string buf = "P6\n" + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    buf.append(reinterpret_cast<const char*>(image.rgb.data()), image.rgb.size());
    write_file(path, buf);
}

Image normalize_image(const ByteImage& image, const std::array<float, 3>& mean,
                      const std::array<float, 3>& std_dev) {
    for (float s : std_dev)
        if (s == 0.0f) throw ValidationError("normalize_image: zero std");
    Image out;
    out.height = image.height;
    out.width = image.width;
    out.data.resize(image.rgb.size());
    for (std::size_t i = 0; i < image.rgb.size(); ++i) {
        const int c = int(i % 3);
        out.data[i] = (float(image.rgb[i]) / 255.0f - mean[c]) / std_dev[c];
    }
    return out;
}

void write_pgm(const std::string& path, const GrayImage& image) {
    if (image.pixels.size() != std::size_t(image.width) * image.height)
        throw IoError("write_pgm: pixel buffer does not match dimensions");
    std::string buf = "P5\n" + std::to_string(image.width) + " " +
                      std::to_string(image.height) + "\n255\n";
    buf.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    write_file(path, buf);
}

GrayImage read_pgm(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    if (pnm_token(r) != "P5") throw IoError(path + ": not a binary PGM (P5)");
    GrayImage img;
    img.width = pnm_int(r, "width");
    img.height = pnm_int(r, "height");
    const int maxval = pnm_int(r, "maxval");
    if (img.width < 1 || img.height < 1) throw IoError(path + ": bad dimensions");
    if (maxval != 255) throw IoError(path + ": only maxval 255 is supported");
    const std::size_t n = std::size_t(img.width) * img.height;
    r.need(n);
    img.pixels.assign(buf.begin() + std::ptrdiff_t(r.pos), buf.begin() + std::ptrdiff_t(r.pos + n));
    return img;
}

void write_mask_pgm(const std::string& path, const MaskExport& mask) {
    GrayImage img;
    img.width = mask.n;
    img.height = mask.n;
    img.pixels.resize(mask.allowed.size());
    for (std::size_t i = 0; i < mask.allowed.size(); ++i)
        img.pixels[i] = mask.allowed[i] ? 255 : 0;
    write_pgm(path, img);
}

void save_features(const std::string& path, const FeatureSet& features) {
    features.validate();
    for (int label : features.labels)
        if (label < 0) throw IoError("save_features: negative label");
    std::string buf;
    buf.append(kFeatureMagic, 6);
    put_u32(buf, std::uint32_t(features.count()));
    put_u32(buf, std::uint32_t(features.dim));
    for (int i = 0; i < features.count(); ++i) {
        put_u32(buf, std::uint32_t(features.labels[i]));
        const auto row = features.row(i);
        for (float v : row) put_f32(buf, v);
    }
    write_file(path, buf);
}

FeatureSet load_features(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    if (r.bytes(6) != std::string(kFeatureMagic, 6))
        throw IoError(path + ": bad feature magic");
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    FeatureSet fs;
    fs.dim = int(dim);
    fs.data.reserve(std::size_t(count) * dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        fs.labels.push_back(int(r.u32()));
        fs.ids.emplace_back();
        for (std::uint32_t j = 0; j < dim; ++j) fs.data.push_back(r.f32());
    }
    fs.validate();
    return fs;
}

void save_features_csv(const std::string& path, const FeatureSet& features) {
    features.validate();
    std::ostringstream out;
    char fbuf[64];
    for (int i = 0; i < features.count(); ++i) {
        out << features.labels[i];
        for (float v : features.row(i)) {
            std::snprintf(fbuf, sizeof fbuf, "%.9g", double(v));
            out << ',' << fbuf;
        }
        out << '\n';
    }
    write_file(path, out.str());
}

FeatureSet load_features_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    FeatureSet fs;
    std::string line;
    int lineno = 0;
    std::vector<float> row;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream fields(line);
        std::string field;
        if (!std::getline(fields, field, ','))
            throw IoError(path + ":" + std::to_string(lineno) + ": empty line");
        const int label = parse_int(trim(field), "label");
        row.clear();
        while (std::getline(fields, field, ','))
            row.push_back(parse_float(trim(field), "feature"));
        if (row.empty()) throw IoError(path + ":" + std::to_string(lineno) + ": no features");
        fs.push(row, label);
    }
    fs.validate();
    return fs;
}

void write_prunemap_csv(const std::string& path, const PruneMap& map) {
    std::ostringstream out;
    out << "row,col,pruned\n";
    for (int r = 0; r < map.grid_rows; ++r)
        for (int c = 0; c < map.grid_cols; ++c)
            out << r << ',' << c << ',' << (map.at(r, c) ? 1 : 0) << '\n';
    write_file(path, out.str());
}

PruneMap read_prunemap_csv(const std::string& path, int patch_size) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "row,col,pruned")
        throw IoError(path + ": missing prune-map header");
    struct Cell {
        int r, c, pruned;
    };
    std::vector<Cell> cells;
    int max_r = -1, max_c = -1;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream fields(line);
        std::string a, b, c;
        if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') ||
            !std::getline(fields, c))
            throw IoError(path + ":" + std::to_string(lineno) + ": expected row,col,pruned");
        Cell cell{parse_int(trim(a), "row"), parse_int(trim(b), "col"),
                  parse_int(trim(c), "pruned")};
        if (cell.pruned != 0 && cell.pruned != 1)
            throw IoError(path + ":" + std::to_string(lineno) + ": pruned must be 0 or 1");
        max_r = std::max(max_r, cell.r);
        max_c = std::max(max_c, cell.c);
        cells.push_back(cell);
    }
    if (cells.empty()) throw IoError(path + ": empty prune map");
    PruneMap map;
    map.grid_rows = max_r + 1;
    map.grid_cols = max_c + 1;
    map.patch_size = patch_size;
    map.pruned.assign(std::size_t(map.grid_rows) * map.grid_cols, 0);
    if (cells.size() != map.pruned.size())
        throw IoError(path + ": cell count does not cover the grid");
    for (const Cell& cell : cells) {
        if (cell.r < 0 || cell.c < 0)
            throw IoError(path + ": negative cell coordinate");
        map.pruned[std::size_t(cell.r) * map.grid_cols + cell.c] =
            std::uint8_t(cell.pruned);
    }
    return map;
}

void write_prunemap_pgm(const std::string& path, const PruneMap& map) {
    GrayImage img;
    img.width = map.grid_cols;
    img.height = map.grid_rows;
    img.pixels.resize(map.pruned.size());
    for (std::size_t i = 0; i < map.pruned.size(); ++i)
        img.pixels[i] = map.pruned[i] ? 0 : 255;
    write_pgm(path, img);
}

}  // namespace sparsevit
