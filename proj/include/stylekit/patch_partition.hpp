#pragma once

#include <vector>

#include "stylekit/image.hpp"

namespace stylekit {

// One selected tile: its cell coordinates in the per-scale grid and its pixel
// rectangle in the source image.
struct PatchTile {
    int grid_row = 0;
    int grid_col = 0;
    int x0 = 0;  // pixel column of the left edge
    int y0 = 0;  // pixel row of the top edge
    int side = 0;
    Image pixels;
};

// Multi-scale reference-image tiles: 8 large (side L/4), 16 medium (L/8) and
// 32 small (L/16). Within a scale no two selected cells share an edge, and
// the summed tile area is exactly 7/8 of the image.
struct PatchSet {
    std::vector<PatchTile> large;
    std::vector<PatchTile> medium;
    std::vector<PatchTile> small;
    int source_size = 0;

    std::size_t total_count() const { return large.size() + medium.size() + small.size(); }
    const PatchTile& tile(std::size_t flat_index) const;
};

constexpr int kLargePatchCount = 8;
constexpr int kMediumPatchCount = 16;
constexpr int kSmallPatchCount = 32;
constexpr int kTotalPatchCount = kLargePatchCount + kMediumPatchCount + kSmallPatchCount;

// Selected grid cells per scale; a pure function of nothing (the layout is
// fixed):
//   large  - 4x4 grid, cells with (row+col) even
//   medium - 8x8 grid, cells with row and col both even
//   small  - 16x16 grid, rows {0,4,8,12} x even cols
// Cells are listed row-major.
std::vector<std::pair<int, int>> selected_cells(int grid);

// Cuts a square image whose side is divisible by 16 into the fixed tile
// layout. Tiles are exact pixel copies; nothing is resampled. Throws
// std::invalid_argument for non-square input or misaligned side length.
PatchSet partition(const Image& image);

// Summed tile area divided by image area; 7/8 for every valid layout.
double covered_area_fraction(const PatchSet& patches);

}  // namespace stylekit
