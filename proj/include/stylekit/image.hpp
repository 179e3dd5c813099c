#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stylekit/tensor.hpp"

namespace stylekit {

// Decoded raster, 1 or 3 channels, interleaved row-major, values in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> pixels;  // height*width*channels

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c) {
        pixels.assign(static_cast<std::size_t>(w) * h * c, 0.0);
    }

    double& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool square() const { return width == height; }
};

// PNG (8-bit grayscale / RGB / RGBA, alpha dropped) and binary PPM/PGM.
Image load_image(const std::string& path);
void save_png(const std::string& path, const Image& img);

Image to_grayscale(const Image& img);
Image to_rgb(const Image& img);

// Separable bilinear resize.
Image resize(const Image& img, int new_w, int new_h);
Image center_crop(const Image& img, int size);

// Shortest side scaled to `target`, then a centered square crop.
Image resize_and_center_crop(const Image& img, int target);

// (3,H,W) tensor in [0,1] from an image (grayscale replicated).
Tensor image_to_chw(const Image& img);
Image chw_to_image(const Tensor& t);

std::uint64_t image_hash(const Image& img);

}  // namespace stylekit
