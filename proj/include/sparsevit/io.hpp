#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sparsevit/eval.hpp"
#include "sparsevit/model.hpp"
#include "sparsevit/prune.hpp"
#include "sparsevit/sparse.hpp"

namespace sparsevit {

// Checkpoint container: magic "VITCKPT1", u32 tensor count, then per
// tensor a u16 name length + name, u8 rank, rank u64 dims, and the f32
// payload. All integers and floats little-endian.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Flat key=value text; '#' starts a comment. Unknown keys are rejected.
void save_config(const std::string& path, const ModelConfig& cfg);
ModelConfig load_config(const std::string& path);

struct ByteImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, interleaved
};

// Binary PPM (P6), 8-bit, maxval 255.
ByteImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ByteImage& image);

// (value/255 - mean) / std per channel.
Image normalize_image(const ByteImage& image, const std::array<float, 3>& mean,
                      const std::array<float, 3>& std_dev);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

// Binary PGM (P5), 8-bit.
void write_pgm(const std::string& path, const GrayImage& image);
GrayImage read_pgm(const std::string& path);

// Queries as rows; 255 = allowed, 0 = masked.
void write_mask_pgm(const std::string& path, const MaskExport& mask);

// Feature container: magic "FEATS1", u32 count, u32 dim, then per row a
// u32 label and dim f32 values, little-endian. Ids are not stored.
void save_features(const std::string& path, const FeatureSet& features);
FeatureSet load_features(const std::string& path);

// One row per line: label,v0,...,v{dim-1}. Floats print with enough
// digits to round-trip.
void save_features_csv(const std::string& path, const FeatureSet& features);
FeatureSet load_features_csv(const std::string& path);

// Header "row,col,pruned" then one line per grid cell.
void write_prunemap_csv(const std::string& path, const PruneMap& map);
PruneMap read_prunemap_csv(const std::string& path, int patch_size);

// 255 = kept, 0 = pruned.
void write_prunemap_pgm(const std::string& path, const PruneMap& map);

}  // namespace sparsevit
