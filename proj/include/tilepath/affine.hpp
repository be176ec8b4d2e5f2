#pragma once
#include <array>
#include <cmath>
#include <numbers>

#include "tilepath/errors.hpp"
#include "tilepath/image.hpp"
#include "tilepath/rng.hpp"

namespace tilepath {

// 3x3 homogeneous transform over (row, col, 1) column vectors. Pixels use
// 1-based (row, col) coordinates; the row axis is image height. Every
// constructor here produces bottom row (0, 0, 1). Rotation, shear and zoom
// are anchored at the image center c = ((h+1)/2, (w+1)/2) via
// T(c) * L * T(-c).
struct AffineMatrix {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    double operator()(std::size_t r, std::size_t c) const { return m[r * 3 + c]; }
    double& operator()(std::size_t r, std::size_t c) { return m[r * 3 + c]; }

    static AffineMatrix identity() { return AffineMatrix{}; }

    AffineMatrix operator*(const AffineMatrix& o) const {
        AffineMatrix out;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < 3; ++k) acc += (*this)(i, k) * o(k, j);
                out(i, j) = acc;
            }
        return out;
    }

    // maps a (row, col) point
    std::array<double, 2> apply(double row, double col) const {
        return {m[0] * row + m[1] * col + m[2], m[3] * row + m[4] * col + m[5]};
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    AffineMatrix inverse() const {
        const double d = det();
        if (std::fabs(d) < 1e-12) throw GeometryError("affine matrix is singular");
        AffineMatrix inv;
        inv.m = {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
                 (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
                 (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
                 (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
                 (m[0] * m[4] - m[1] * m[3]) / d};
        return inv;
    }
};

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

namespace detail {
inline AffineMatrix center_anchored(double a, double b, double c, double d,
                                    double h, double w) {
    // T(center) * [[a,b],[c,d]] * T(-center)
    const double cr = (h + 1.0) / 2.0;
    const double cc = (w + 1.0) / 2.0;
    AffineMatrix out;
    out.m = {a, b, cr - a * cr - b * cc, c, d, cc - c * cr - d * cc, 0, 0, 1};
    return out;
}
}  // namespace detail

// Center-anchored rotation; linear block ((cos,-sin),(sin,cos)), theta in degrees.
inline AffineMatrix rotation_matrix(double theta_deg, std::size_t h, std::size_t w) {
    const double t = deg_to_rad(theta_deg);
    return detail::center_anchored(std::cos(t), -std::sin(t), std::sin(t), std::cos(t),
                                   static_cast<double>(h), static_cast<double>(w));
}

// Pure translation: tx along rows (height), ty along columns (width).
inline AffineMatrix shift_matrix(double tx, double ty) {
    AffineMatrix out;
    out.m = {1, 0, tx, 0, 1, ty, 0, 0, 1};
    return out;
}

// Center-anchored shear with linear block ((1, -sin s),(0, cos s)), s in degrees.
inline AffineMatrix shear_matrix(double shear_deg, std::size_t h, std::size_t w) {
    if (std::fabs(shear_deg) >= 90.0) {
        throw GeometryError("shear_matrix: |shear| must be < 90 degrees, got " +
                            std::to_string(shear_deg));
    }
    const double s = deg_to_rad(shear_deg);
    return detail::center_anchored(1.0, -std::sin(s), 0.0, std::cos(s),
                                   static_cast<double>(h), static_cast<double>(w));
}

// Center-anchored scaling diag(zx, zy); the image center is a fixed point.
inline AffineMatrix zoom_matrix(double zx, double zy, std::size_t h, std::size_t w) {
    if (zx <= 0.0 || zy <= 0.0) {
        throw GeometryError("zoom_matrix: scales must be positive, got zx=" +
                            std::to_string(zx) + " zy=" + std::to_string(zy));
    }
    return detail::center_anchored(zx, 0.0, 0.0, zy, static_cast<double>(h),
                                   static_cast<double>(w));
}

enum class Interpolation { Nearest, Bilinear };

// Inverse warping: output pixel p samples the source at m^-1 * p.
// Out-of-bounds source coordinates take `fill`.
inline Image apply_affine(const Image& img, const AffineMatrix& m,
                          Interpolation interp = Interpolation::Nearest,
                          double fill = 0.0) {
    const AffineMatrix inv = m.inverse();  // throws on singular m
    Image out(img.height, img.width, img.channels);
    const double h = static_cast<double>(img.height);
    const double w = static_cast<double>(img.width);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            const auto src = inv.apply(static_cast<double>(r + 1), static_cast<double>(c + 1));
            if (interp == Interpolation::Nearest) {
                const double sr = std::round(src[0]);
                const double sc = std::round(src[1]);
                if (sr < 1.0 || sr > h || sc < 1.0 || sc > w) {
                    for (std::size_t ch = 0; ch < img.channels; ++ch)
                        out.at(r, c, ch) = fill;
                } else {
                    const std::size_t ir = static_cast<std::size_t>(sr) - 1;
                    const std::size_t ic = static_cast<std::size_t>(sc) - 1;
                    for (std::size_t ch = 0; ch < img.channels; ++ch)
                        out.at(r, c, ch) = img.at(ir, ic, ch);
                }
            } else {
                const double fr = std::floor(src[0]);
                const double fc = std::floor(src[1]);
                const double wr = src[0] - fr;
                const double wc = src[1] - fc;
                for (std::size_t ch = 0; ch < img.channels; ++ch) {
                    double acc = 0.0;
                    for (int dr = 0; dr <= 1; ++dr) {
                        for (int dc = 0; dc <= 1; ++dc) {
                            const double rr = fr + dr;
                            const double cc = fc + dc;
                            const double weight =
                                (dr ? wr : 1.0 - wr) * (dc ? wc : 1.0 - wc);
                            double v = fill;
                            if (rr >= 1.0 && rr <= h && cc >= 1.0 && cc <= w) {
                                v = img.at(static_cast<std::size_t>(rr) - 1,
                                           static_cast<std::size_t>(cc) - 1, ch);
                            }
                            acc += weight * v;
                        }
                    }
                    out.at(r, c, ch) = acc;
                }
            }
        }
    }
    return out;
}

// column j -> column (w+1-j); involution
inline Image horizontal_flip(const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (std::size_t r = 0; r < img.height; ++r)
        for (std::size_t c = 0; c < img.width; ++c)
            for (std::size_t ch = 0; ch < img.channels; ++ch)
                out.at(r, c, ch) = img.at(r, img.width - 1 - c, ch);
    return out;
}

struct AugmentConfig {
    double theta_range = 0.0;   // degrees, sampled in [-theta_range, theta_range]
    double tx_range = 0.0;      // pixels along rows
    double ty_range = 0.0;      // pixels along columns
    double shear_range = 0.0;   // degrees
    double zoom_min = 1.0;      // zx, zy sampled independently in [zoom_min, zoom_max]
    double zoom_max = 1.0;
    bool horizontal_flip = false;
    std::size_t image_height = 50;
    std::size_t image_width = 50;

    void validate() const {
        if (zoom_min <= 0.0 || zoom_max <= 0.0 || zoom_min > zoom_max) {
            throw ConfigError("augment config: zoom range must be positive and ordered");
        }
        if (theta_range < 0.0 || tx_range < 0.0 || ty_range < 0.0 || shear_range < 0.0 ||
            shear_range >= 90.0) {
            throw ConfigError("augment config: ranges must be non-negative (shear < 90)");
        }
    }
};

struct SampledAugmentation {
    AffineMatrix matrix;
    bool flip = false;
    // drawn parameters, kept for the transform log
    double theta = 0.0, tx = 0.0, ty = 0.0, shear = 0.0, zx = 1.0, zy = 1.0;
};

// One random draw of each enabled transform, composed as
// M = rotation * shear * zoom * shift (shift applied first to a point).
inline SampledAugmentation sample_augmentation(const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    SampledAugmentation s;
    s.theta = cfg.theta_range == 0.0 ? 0.0 : rng.uniform(-cfg.theta_range, cfg.theta_range);
    s.tx = cfg.tx_range == 0.0 ? 0.0 : rng.uniform(-cfg.tx_range, cfg.tx_range);
    s.ty = cfg.ty_range == 0.0 ? 0.0 : rng.uniform(-cfg.ty_range, cfg.ty_range);
    s.shear = cfg.shear_range == 0.0 ? 0.0 : rng.uniform(-cfg.shear_range, cfg.shear_range);
    s.zx = rng.uniform(cfg.zoom_min, cfg.zoom_max);
    s.zy = rng.uniform(cfg.zoom_min, cfg.zoom_max);
    s.flip = cfg.horizontal_flip && rng.bernoulli(0.5);
    const std::size_t h = cfg.image_height, w = cfg.image_width;
    s.matrix = rotation_matrix(s.theta, h, w) * shear_matrix(s.shear, h, w) *
               zoom_matrix(s.zx, s.zy, h, w) * shift_matrix(s.tx, s.ty);
    return s;
}

}  // namespace tilepath
