#include "diffem/io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace diffem {

namespace {

void put_u32le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("unexpected end of file reading " + what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f64le(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

}  // namespace

void write_rtf1(const std::string& path, const ImageTensor& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write("RTF1", 4);
    put_u32le(out, static_cast<uint32_t>(image.height));
    put_u32le(out, static_cast<uint32_t>(image.width));
    put_u32le(out, static_cast<uint32_t>(image.channels));
    for (double v : image.data) put_f64le(out, v);
    if (!out) throw Error("write failed: " + path);
}

ImageTensor read_rtf1(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "RTF1", 4) != 0) {
        throw Error("bad magic in " + path + " (expected RTF1)");
    }
    const uint32_t h = get_u32le(in, "height");
    const uint32_t w = get_u32le(in, "width");
    const uint32_t c = get_u32le(in, "channels");
    if (h < 1 || w < 1 || (c != 1 && c != 3)) throw Error("bad dims in " + path);
    ImageTensor image(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    std::vector<unsigned char> raw(image.data.size() * 8);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw Error("unexpected end of file in " + path);
    }
    for (size_t i = 0; i < image.data.size(); ++i) {
        uint64_t bits = 0;
        for (int k = 7; k >= 0; --k) bits = (bits << 8) | raw[i * 8 + k];
        std::memcpy(&image.data[i], &bits, 8);
    }
    return image;
}

void write_kernel_rtf1(const std::string& path, const BlurKernel& kernel) {
    write_rtf1(path, kernel.to_grid());
}

BlurKernel read_kernel_rtf1(const std::string& path) {
    ImageTensor grid = read_rtf1(path);
    if (grid.height != grid.width || grid.channels != 1) {
        throw Error("kernel file must hold a square single-channel grid: " + path);
    }
    return BlurKernel::create(grid.height, grid.data);
}

namespace {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

void write_png(const std::string& path, const ImageTensor& image) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    const int color = image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, image.width, image.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(image.width) * image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < image.channels; ++c) {
                double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
                row[static_cast<size_t>(x) * image.channels + c] =
                    static_cast<png_byte>(std::lround(v * 255.0));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageTensor read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error("cannot open: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw Error("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png read failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int c = static_cast<int>(png_get_channels(png, info));
    if (c != 1 && c != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("unsupported PNG channel count in " + path);
    }
    std::vector<png_byte> row(static_cast<size_t>(w) * c);
    ImageTensor image(h, w, c);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < c; ++ch) {
                image.at(y, x, ch) = row[static_cast<size_t>(x) * c + ch] / 255.0;
            }
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return image;
}

bool has_png_extension(const std::string& path) {
    auto dotpos = path.find_last_of('.');
    if (dotpos == std::string::npos) return false;
    std::string ext = path.substr(dotpos + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == "png";
}

ImageTensor read_image(const std::string& path) {
    return has_png_extension(path) ? read_png(path) : read_rtf1(path);
}

}  // namespace diffem
