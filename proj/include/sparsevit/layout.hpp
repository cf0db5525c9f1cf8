#pragma once

#include <string>

#include "sparsevit/errors.hpp"

namespace sparsevit {

struct Coord {
    int row = 0;
    int col = 0;
};

// Maps sequence positions to 2D patch-grid coordinates. Global tokens
// occupy positions [0, num_global); patch token (r, c) sits at
// num_global + r*grid_cols + c.
class TokenLayout {
public:
    TokenLayout(int grid_rows, int grid_cols, int num_global)
        : grid_rows_(grid_rows), grid_cols_(grid_cols), num_global_(num_global) {
        if (grid_rows < 1 || grid_cols < 1 || num_global < 0)
            throw ValidationError("TokenLayout: bad dimensions");
    }

    static TokenLayout for_image(int height, int width, int patch_size, int num_global) {
        if (patch_size < 1) throw ValidationError("TokenLayout: patch_size must be >= 1");
        if (height < patch_size || width < patch_size || height % patch_size != 0 ||
            width % patch_size != 0)
            throw ResolutionError("input " + std::to_string(height) + "x" +
                                  std::to_string(width) + " is not a multiple of patch size " +
                                  std::to_string(patch_size));
        return TokenLayout(height / patch_size, width / patch_size, num_global);
    }

    int grid_rows() const { return grid_rows_; }
    int grid_cols() const { return grid_cols_; }
    int num_global() const { return num_global_; }
    int patch_count() const { return grid_rows_ * grid_cols_; }
    int total() const { return num_global_ + patch_count(); }

    bool is_global(int i) const { return i < num_global_; }

    int index_of(int r, int c) const { return num_global_ + r * grid_cols_ + c; }

    Coord coord_of(int i) const {
        const int p = i - num_global_;
        if (p < 0 || p >= patch_count())
            throw std::out_of_range("TokenLayout::coord_of: not a patch token");
        return {p / grid_cols_, p % grid_cols_};
    }

private:
    int grid_rows_;
    int grid_cols_;
    int num_global_;
};

}  // namespace sparsevit
