#pragma once

#include "facecap/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace facecap {

/// Interleaved image, row-major from the top-left pixel.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{}) : width(w), height(h), channels(c) {
        if (w < 0 || h < 0 || c <= 0) throw ValidationError("invalid image shape");
        data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), fill);
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(c);
    }
    T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
    const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

    bool same_shape(int w, int h) const { return width == w && height == h; }
    template <typename U>
    bool same_shape(const Image<U>& o) const { return width == o.width && height == o.height; }
};

using ImageU8 = Image<std::uint8_t>;
using ImageF = Image<float>;

/// Linear [0,1] float to 8-bit sRGB (clamped).
ImageU8 encode_srgb(const ImageF& linear);
/// Plain [0,1] scaling of stored 8-bit values (no transfer function).
ImageF to_unit(const ImageU8& image);

/// 8-bit PNG, gray (1 channel) or RGB (3 channels). Loading converts
/// palette, 16-bit and alpha inputs to 8-bit gray or RGB.
void save_png(const std::filesystem::path& path, const ImageU8& image);
ImageU8 load_png(const std::filesystem::path& path);

/// ASCII PGM (P2, 1 channel) / PPM (P3, 3 channels).
void save_pnm(const std::filesystem::path& path, const ImageU8& image);
ImageU8 load_pnm(const std::filesystem::path& path);

} // namespace facecap
