#include "stylekit/patch_partition.hpp"

#include <stdexcept>
#include <string>

namespace stylekit {

const PatchTile& PatchSet::tile(std::size_t flat_index) const {
    if (flat_index < large.size()) return large[flat_index];
    flat_index -= large.size();
    if (flat_index < medium.size()) return medium[flat_index];
    flat_index -= medium.size();
    return small.at(flat_index);
}

std::vector<std::pair<int, int>> selected_cells(int grid) {
    std::vector<std::pair<int, int>> cells;
    if (grid == 4) {
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if ((r + c) % 2 == 0) cells.emplace_back(r, c);
    } else if (grid == 8) {
        for (int r = 0; r < 8; r += 2)
            for (int c = 0; c < 8; c += 2) cells.emplace_back(r, c);
    } else if (grid == 16) {
        for (int r = 0; r < 16; r += 4)
            for (int c = 0; c < 16; c += 2) cells.emplace_back(r, c);
    } else {
        throw std::invalid_argument("selected_cells: grid must be 4, 8 or 16");
    }
    return cells;
}

namespace {

PatchTile cut_tile(const Image& image, int grid_row, int grid_col, int side) {
    PatchTile t;
    t.grid_row = grid_row;
    t.grid_col = grid_col;
    t.side = side;
    t.x0 = grid_col * side;
    t.y0 = grid_row * side;
    t.pixels = Image(side, side, image.channels);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < image.channels; ++c)
                t.pixels.at(y, x, c) = image.at(t.y0 + y, t.x0 + x, c);
    return t;
}

}  // namespace

PatchSet partition(const Image& image) {
    if (!image.square())
        throw std::invalid_argument("partition: image must be square, got " +
                                    std::to_string(image.width) + "x" +
                                    std::to_string(image.height));
    const int L = image.width;
    if (L <= 0 || L % 16 != 0)
        throw std::invalid_argument("partition: side length " + std::to_string(L) +
                                    " must be divisible by 16 (resize or crop first)");

    PatchSet out;
    out.source_size = L;
    for (auto [r, c] : selected_cells(4)) out.large.push_back(cut_tile(image, r, c, L / 4));
    for (auto [r, c] : selected_cells(8)) out.medium.push_back(cut_tile(image, r, c, L / 8));
    for (auto [r, c] : selected_cells(16)) out.small.push_back(cut_tile(image, r, c, L / 16));
    return out;
}

double covered_area_fraction(const PatchSet& patches) {
    const auto area = [](const std::vector<PatchTile>& tiles) {
        long long a = 0;
        for (const auto& t : tiles) a += static_cast<long long>(t.side) * t.side;
        return a;
    };
    const long long covered = area(patches.large) + area(patches.medium) + area(patches.small);
    const long long total =
        static_cast<long long>(patches.source_size) * patches.source_size;
    return static_cast<double>(covered) / static_cast<double>(total);
}

}  // namespace stylekit
