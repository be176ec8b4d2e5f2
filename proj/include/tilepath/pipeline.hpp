#pragma once
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "tilepath/datagen.hpp"
#include "tilepath/eval.hpp"
#include "tilepath/model.hpp"

#include "json.hpp"

namespace tilepath {

struct TileOrigin {
    std::size_t row = 0;
    std::size_t col = 0;
};

struct TileGrid {
    std::size_t image_height = 0, image_width = 0;
    std::size_t window = 50, stride = 50;
    std::size_t rows = 0, cols = 0;          // grid extents
    std::vector<TileOrigin> tiles;           // row-major by origin
};

// Non-overlapping by default (stride == window). Origins advance by stride
// while origin + window fits; ragged margins are dropped, never padded.
inline TileGrid tile(const Image& img, std::size_t window = 50, std::size_t stride = 0) {
    if (stride == 0) stride = window;
    if (window == 0 || stride == 0) throw GeometryError("tile: window and stride must be positive");
    if (window > img.height || window > img.width) {
        throw GeometryError("tile: window " + std::to_string(window) + " exceeds image " +
                            std::to_string(img.height) + "x" + std::to_string(img.width));
    }
    TileGrid grid;
    grid.image_height = img.height;
    grid.image_width = img.width;
    grid.window = window;
    grid.stride = stride;
    grid.rows = (img.height - window) / stride + 1;
    grid.cols = (img.width - window) / stride + 1;
    grid.tiles.reserve(grid.rows * grid.cols);
    for (std::size_t r = 0; r < grid.rows; ++r)
        for (std::size_t c = 0; c < grid.cols; ++c)
            grid.tiles.push_back({r * stride, c * stride});
    return grid;
}

inline Image crop(const Image& img, const TileOrigin& origin, std::size_t window) {
    Image out(window, window, img.channels);
    for (std::size_t r = 0; r < window; ++r)
        for (std::size_t c = 0; c < window; ++c)
            for (std::size_t ch = 0; ch < img.channels; ++ch)
                out.at(r, c, ch) = img.at(origin.row + r, origin.col + c, ch);
    return out;
}

struct SkinMask {
    TileGrid grid;
    std::vector<bool> skin;  // per tile, aligned with grid.tiles
};

struct DiagnosisReport {
    std::vector<int> tile_class;      // class index per tile, -1 for non-skin
    std::vector<double> proportions;  // 7-vector over skin tiles
    std::size_t skin_tile_count = 0;
    std::size_t total_tile_count = 0;
    bool empty_report = false;        // set when no tiles pass the skin gate
};

namespace detail {

inline std::size_t thread_budget() {
    // TILEPATH_THREADS caps tile-classification parallelism; 0 or unset = auto
    const char* env = std::getenv("TILEPATH_THREADS");
    std::size_t n = 0;
    if (env) n = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

// Deterministic parallel map over tile indices: results land by index.
template <typename Fn>
inline void parallel_tiles(std::size_t count, Fn&& fn) {
    const std::size_t threads = std::min(thread_budget(), count == 0 ? 1 : count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += threads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// Head probability vector for one tile, through the extractor when present.
inline Tensor classify_tile(const Image& patch, const Model* extractor, const Model& head) {
    if (extractor) {
        return forward(head, extract_features(*extractor, patch), Mode::Infer);
    }
    return forward(head, patch.to_tensor(), Mode::Infer);
}

}  // namespace detail

// Tile marked skin iff P(class 0) >= threshold.
inline SkinMask detect_skin(const Image& img, const Model* extractor, const Model& head2,
                            double threshold = 0.5, std::size_t window = 50,
                            std::size_t stride = 0) {
    if (threshold <= 0.0 || threshold > 1.0) {
        throw ConfigError("detect_skin: threshold must be in (0,1]");
    }
    SkinMask mask;
    mask.grid = tile(img, window, stride);
    mask.skin.assign(mask.grid.tiles.size(), false);
    std::vector<char> skin(mask.grid.tiles.size(), 0);
    detail::parallel_tiles(mask.grid.tiles.size(), [&](std::size_t i) {
        const Image patch = crop(img, mask.grid.tiles[i], mask.grid.window);
        const Tensor probs = detail::classify_tile(patch, extractor, head2);
        skin[i] = probs[0] >= threshold ? 1 : 0;
    });
    for (std::size_t i = 0; i < skin.size(); ++i) mask.skin[i] = skin[i] != 0;
    return mask;
}

// Non-skin tiles painted black; skin tiles untouched.
inline Image render_mask(const Image& img, const SkinMask& mask) {
    if (mask.grid.image_height != img.height || mask.grid.image_width != img.width) {
        throw GeometryError("render_mask: mask grid does not match image dimensions");
    }
    Image out = img;
    for (std::size_t i = 0; i < mask.grid.tiles.size(); ++i) {
        if (mask.skin[i]) continue;
        const TileOrigin& o = mask.grid.tiles[i];
        for (std::size_t r = 0; r < mask.grid.window; ++r)
            for (std::size_t c = 0; c < mask.grid.window; ++c)
                for (std::size_t ch = 0; ch < img.channels; ++ch)
                    out.at(o.row + r, o.col + c, ch) = 0.0;
    }
    return out;
}

// Two stages in fixed order: skin gate first, then seven-class argmax over
// the skin tiles. Non-skin tiles are excluded from the proportion vector.
inline std::pair<DiagnosisReport, SkinMask> diagnose(const Image& img, const Model* extractor,
                                                     const Model& head2, const Model& head7,
                                                     double threshold = 0.5,
                                                     std::size_t window = 50,
                                                     std::size_t stride = 0) {
    SkinMask mask = detect_skin(img, extractor, head2, threshold, window, stride);
    DiagnosisReport report;
    report.total_tile_count = mask.grid.tiles.size();
    report.tile_class.assign(report.total_tile_count, -1);
    report.proportions.assign(7, 0.0);
    std::vector<int> cls(report.total_tile_count, -1);
    detail::parallel_tiles(report.total_tile_count, [&](std::size_t i) {
        if (!mask.skin[i]) return;
        const Image patch = crop(img, mask.grid.tiles[i], mask.grid.window);
        const Tensor probs = detail::classify_tile(patch, extractor, head7);
        cls[i] = static_cast<int>(argmax(probs));
    });
    for (std::size_t i = 0; i < cls.size(); ++i) {
        report.tile_class[i] = cls[i];
        if (cls[i] >= 0) {
            ++report.skin_tile_count;
            report.proportions[static_cast<std::size_t>(cls[i])] += 1.0;
        }
    }
    if (report.skin_tile_count == 0) {
        report.empty_report = true;
    } else {
        for (double& p : report.proportions)
            p /= static_cast<double>(report.skin_tile_count);
    }
    return {std::move(report), std::move(mask)};
}

inline nlohmann::ordered_json report_to_json(const DiagnosisReport& report,
                                             const SkinMask& mask) {
    nlohmann::ordered_json j;
    j["class_names"] = class_names_7();
    j["proportions"] = report.proportions;
    j["skin_tile_count"] = report.skin_tile_count;
    j["total_tile_count"] = report.total_tile_count;
    j["empty_report"] = report.empty_report;
    nlohmann::ordered_json per_tile = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.tile_class.size(); ++i) {
        per_tile.push_back({{"row", mask.grid.tiles[i].row},
                            {"col", mask.grid.tiles[i].col},
                            {"skin", static_cast<bool>(mask.skin[i])},
                            {"class", report.tile_class[i]}});
    }
    j["per_tile"] = std::move(per_tile);
    return j;
}

// class,proportion rows in c0..c6 order
inline void write_histogram_csv(const DiagnosisReport& report,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_histogram_csv: cannot open " + path.string());
    out << "class,name,proportion\n";
    char buf[64];
    for (std::size_t i = 0; i < 7; ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", report.proportions[i]);
        out << "c" << i << "," << class_names_7()[i] << "," << buf << "\n";
    }
}

}  // namespace tilepath
