#pragma once
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tilepath/errors.hpp"
#include "tilepath/tensor.hpp"

namespace tilepath {

// H x W x C raster, row-major, pixel values in [0,1] once normalized.
// Raw 8-bit ingest lands in [0,255]; call normalize() before feeding models.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<double> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
        : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

    double at(std::size_t r, std::size_t col, std::size_t ch) const {
        return pixels[(r * width + col) * channels + ch];
    }
    double& at(std::size_t r, std::size_t col, std::size_t ch) {
        return pixels[(r * width + col) * channels + ch];
    }

    Tensor to_tensor() const { return Tensor({height, width, channels}, pixels); }

    static Image from_tensor(const Tensor& t) {
        if (t.rank() != 3) {
            throw DimensionError("image tensor must be rank 3, got " +
                                 Tensor::shape_str(t.shape()));
        }
        Image img(t.shape()[0], t.shape()[1], t.shape()[2]);
        img.pixels = t.data();
        return img;
    }
};

// Divides raw [0,255] values by 255. Rejects out-of-range input.
inline Image normalize(const Image& raw) {
    Image out = raw;
    for (double& v : out.pixels) {
        if (v < 0.0 || v > 255.0 || !std::isfinite(v)) {
            throw DataError("normalize: raw pixel value " + std::to_string(v) +
                            " outside [0,255]");
        }
        v /= 255.0;
    }
    return out;
}

inline std::uint8_t to_byte(double v) {
    double x = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
    return static_cast<std::uint8_t>(x);
}

// ---- portable pixmap / graymap I/O (binary P6 / P5, 8-bit) ----

namespace detail {
inline int pnm_next_token(std::istream& in) {
    // skips whitespace and '#' comments, returns next integer
    while (true) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    in >> value;
    return value;
}
}  // namespace detail

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 3) throw FormatError("write_ppm: image must have 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_ppm: cannot open " + path.string());
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(img.width * 3);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch)
                row[c * 3 + ch] = to_byte(img.at(r, c, ch));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write_ppm: write failed for " + path.string());
}

inline void write_pgm(const Image& img, const std::filesystem::path& path) {
    if (img.channels != 1) throw FormatError("write_pgm: image must have 1 channel");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(img.width);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) row[c] = to_byte(img.at(r, c, 0));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write_pgm: write failed for " + path.string());
}

// Reads binary P6 (3-channel) or P5 (1-channel), returning values in [0,1].
inline Image read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pnm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    std::size_t channels;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw FormatError("read_pnm: unsupported magic '" + magic + "' in " + path.string());
    }
    const int w = detail::pnm_next_token(in);
    const int h = detail::pnm_next_token(in);
    const int maxval = detail::pnm_next_token(in);
    if (w <= 0 || h <= 0) throw FormatError("read_pnm: bad dimensions in " + path.string());
    if (maxval != 255) throw FormatError("read_pnm: only maxval 255 supported, got " +
                                         std::to_string(maxval));
    in.get();  // single whitespace after header
    Image img(static_cast<std::size_t>(h), static_cast<std::size_t>(w), channels);
    std::vector<std::uint8_t> buf(img.pixels.size());
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size())) {
        throw FormatError("read_pnm: truncated pixel data in " + path.string());
    }
    for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
    return img;
}

}  // namespace tilepath
