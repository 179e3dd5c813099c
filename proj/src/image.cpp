#include "stylekit/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace stylekit {

namespace {

double srgb_to_unit(std::uint8_t v) { return v / 255.0; }

std::uint8_t unit_to_srgb(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

Image load_png_file(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("image: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("image: png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("image: png info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("image: failed to decode " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("image: unsupported channel count in " + path);
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = srgb_to_unit(raw[i]);
    return img;
}

Image load_pnm_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("image: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P5" && magic != "P6")
        throw std::runtime_error("image: unsupported PNM flavour in " + path);
    auto next_int = [&is, &path]() {
        int v;
        while (is >> std::ws && is.peek() == '#') is.ignore(1 << 20, '\n');
        if (!(is >> v)) throw std::runtime_error("image: malformed PNM header in " + path);
        return v;
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw std::runtime_error("image: only 8-bit PNM supported: " + path);
    is.ignore(1);
    const int channels = magic == "P6" ? 3 : 1;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("image: truncated PNM data in " + path);
    Image img(w, h, channels);
    for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = srgb_to_unit(raw[i]);
    return img;
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Image load_image(const std::string& path) {
    if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) return load_pnm_file(path);
    return load_png_file(path);
}

void save_png(const std::string& path, const Image& img) {
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("image: save expects 1 or 3 channels");
    const std::string tmp = path + ".tmp";
    {
        std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw std::runtime_error("image: cannot write " + tmp);
        png_structp png =
            png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw std::runtime_error("image: png writer allocation failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw std::runtime_error("image: png info allocation failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw std::runtime_error("image: failed to encode " + path);
        }
        png_init_io(png, fp.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), 8,
                     img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    row[static_cast<std::size_t>(x) * img.channels + c] =
                        unit_to_srgb(img.at(y, x, c));
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("image: cannot move " + tmp + " to " + path);
}

Image to_grayscale(const Image& img) {
    if (img.channels == 1) return img;
    Image out(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(y, x, 0) =
                0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
    return out;
}

Image to_rgb(const Image& img) {
    if (img.channels == 3) return img;
    Image out(img.width, img.height, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    return out;
}

Image resize(const Image& img, int new_w, int new_h) {
    if (new_w <= 0 || new_h <= 0) throw std::invalid_argument("image: bad resize target");
    if (new_w == img.width && new_h == img.height) return img;
    Image out(new_w, new_h, img.channels);
    const double sx = static_cast<double>(img.width) / new_w;
    const double sy = static_cast<double>(img.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < new_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

Image center_crop(const Image& img, int size) {
    if (size > img.width || size > img.height)
        throw std::invalid_argument("image: crop larger than source");
    const int x0 = (img.width - size) / 2;
    const int y0 = (img.height - size) / 2;
    Image out(size, size, img.channels);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

Image resize_and_center_crop(const Image& img, int target) {
    if (img.width == target && img.height == target) return img;
    int new_w, new_h;
    if (img.width <= img.height) {
        new_w = target;
        new_h = static_cast<int>(std::lround(static_cast<double>(img.height) * target / img.width));
    } else {
        new_h = target;
        new_w = static_cast<int>(std::lround(static_cast<double>(img.width) * target / img.height));
    }
    return center_crop(resize(img, new_w, new_h), target);
}

Tensor image_to_chw(const Image& img) {
    const Image rgb = to_rgb(img);
    Tensor t({3, rgb.height, rgb.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < rgb.height; ++y)
            for (int x = 0; x < rgb.width; ++x) t.at(c, y, x) = rgb.at(y, x, c);
    return t;
}

Image chw_to_image(const Tensor& t) {
    if (t.rank() != 3 || (t.dim(0) != 1 && t.dim(0) != 3))
        throw std::invalid_argument("image: tensor must be (1|3,H,W)");
    Image img(t.dim(2), t.dim(1), t.dim(0));
    for (int c = 0; c < t.dim(0); ++c)
        for (int y = 0; y < t.dim(1); ++y)
            for (int x = 0; x < t.dim(2); ++x) img.at(y, x, c) = t.at(c, y, x);
    return img;
}

std::uint64_t image_hash(const Image& img) {
    std::uint64_t h = fnv1a64(&img.width, sizeof(img.width));
    h = fnv1a64(&img.height, sizeof(img.height), h);
    h = fnv1a64(&img.channels, sizeof(img.channels), h);
    return fnv1a64(img.pixels.data(), img.pixels.size() * sizeof(double), h);
}

}  // namespace stylekit
