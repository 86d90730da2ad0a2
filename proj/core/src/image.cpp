#include "facecap/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace facecap {

namespace {

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double srgb_oetf(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

ImageU8 encode_srgb(const ImageF& linear) {
    ImageU8 out(linear.width, linear.height, linear.channels);
    for (std::size_t i = 0; i < linear.data.size(); ++i) out.data[i] = quantize(srgb_oetf(linear.data[i]));
    return out;
}

ImageF to_unit(const ImageU8& image) {
    ImageF out(image.width, image.height, image.channels);
    for (std::size_t i = 0; i < image.data.size(); ++i) out.data[i] = static_cast<float>(image.data[i]) / 255.0f;
    return out;
}

void save_png(const std::filesystem::path& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3)
        throw ValidationError("PNG output needs 1 or 3 channels, got " + std::to_string(image.channels));
    if (image.width <= 0 || image.height <= 0) throw ValidationError("cannot write an empty PNG");
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot open '" + path.string() + "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.channels);
    for (int y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.data.data() + static_cast<std::size_t>(y) * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) throw IoError("failed writing '" + path.string() + "'");
}

ImageU8 load_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) throw IoError("cannot open '" + path.string() + "'");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ParseError("'" + path.string() + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialisation failed");
    }
    ImageU8 out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("corrupt PNG '" + path.string() + "'");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const auto color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    out = ImageU8(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)),
                  channels);
    const std::size_t stride = static_cast<std::size_t>(out.width) * static_cast<std::size_t>(channels);
    std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.data.data() + static_cast<std::size_t>(y) * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_pnm(const std::filesystem::path& path, const ImageU8& image) {
    if (image.channels != 1 && image.channels != 3)
        throw ValidationError("PNM output needs 1 or 3 channels, got " + std::to_string(image.channels));
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << (image.channels == 1 ? "P2" : "P3") << '\n' << image.width << ' ' << image.height << "\n255\n";
    const std::size_t stride = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (std::size_t i = 0; i < stride; ++i) {
            if (i) out << ' ';
            out << static_cast<int>(image.data[static_cast<std::size_t>(y) * stride + i]);
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ImageU8 load_pnm(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    // Strip comments first so the token stream only sees numbers.
    std::ostringstream clean;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        clean << line << '\n';
    }
    std::istringstream s(clean.str());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    s >> magic >> w >> h >> maxval;
    if (!s || (magic != "P2" && magic != "P3") || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw ParseError("'" + path.string() + "' is not an 8-bit ASCII PGM/PPM");
    ImageU8 out(w, h, magic == "P2" ? 1 : 3);
    for (auto& v : out.data) {
        int x = -1;
        if (!(s >> x) || x < 0 || x > maxval) throw ParseError("'" + path.string() + "' has bad or missing samples");
        v = static_cast<std::uint8_t>(maxval == 255 ? x : std::lround(x * 255.0 / maxval));
    }
    return out;
}

} // namespace facecap
