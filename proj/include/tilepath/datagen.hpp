#pragma once
#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "tilepath/image.hpp"
#include "tilepath/rng.hpp"
#include "tilepath/train.hpp"

namespace tilepath {

constexpr std::size_t kPatchSize = 50;

// Canonical seven-class order (index 0..6).
inline const std::vector<std::string>& class_names_7() {
    static const std::vector<std::string> names = {
        "papule", "cyst", "blackhead", "normal_skin", "pustule", "whitehead", "nodule"};
    return names;
}

struct LabeledPatch {
    Image image;  // 50x50, values in [0,1]
    std::size_t label = 0;
    std::string source_id;
};

// Procedural texture: base color + per-pixel uniform noise + random soft blobs.
struct TextureParams {
    double base_r = 0.5, base_g = 0.5, base_b = 0.5;
    double noise_amp = 0.05;
    std::size_t blob_count = 0;
    double blob_radius = 5.0;
    double blob_contrast = 0.0;  // signed offset applied inside blobs

    bool operator==(const TextureParams&) const = default;
};

struct ClassSpec {
    std::string name;
    std::vector<TextureParams> variants;  // one is picked per patch

    bool operator==(const ClassSpec&) const = default;
};

struct SynthSpec {
    std::vector<ClassSpec> classes;
    TextureParams nonskin;  // used by compose_scene for non-skin tiles
    std::size_t samples_per_class = 200;
    std::uint64_t seed = 0;

    void validate() const {
        if (classes.size() < 2) throw ConfigError("synth spec: need at least 2 classes");
        if (samples_per_class == 0) throw ConfigError("synth spec: samples_per_class must be positive");
        for (std::size_t i = 0; i < classes.size(); ++i) {
            if (classes[i].variants.empty()) {
                throw ConfigError("synth spec: class '" + classes[i].name + "' has no texture");
            }
            for (std::size_t j = i + 1; j < classes.size(); ++j) {
                if (classes[i].variants == classes[j].variants) {
                    throw ConfigError("synth spec: classes '" + classes[i].name + "' and '" +
                                      classes[j].name + "' have identical texture parameters");
                }
            }
        }
    }
};

// The seven skin textures share a warm, bright palette (so a binary skin
// detector generalizes across them) and differ in base color and blob
// structure; non-skin is a dark noisy background.
inline TextureParams nonskin_texture() {
    return {.base_r = 0.10, .base_g = 0.12, .base_b = 0.25, .noise_amp = 0.08,
            .blob_count = 3, .blob_radius = 6.0, .blob_contrast = -0.05};
}

inline std::vector<TextureParams> skin_textures_7() {
    return {
        {.base_r = 0.92, .base_g = 0.42, .base_b = 0.38, .noise_amp = 0.04, .blob_count = 6, .blob_radius = 3.0, .blob_contrast = -0.25},   // papule: small dark spots on red
        {.base_r = 0.70, .base_g = 0.52, .base_b = 0.66, .noise_amp = 0.04, .blob_count = 2, .blob_radius = 9.0, .blob_contrast = -0.30},   // cyst: large dark swellings, mauve
        {.base_r = 0.85, .base_g = 0.78, .base_b = 0.50, .noise_amp = 0.03, .blob_count = 10, .blob_radius = 1.5, .blob_contrast = -0.55},  // blackhead: tiny dark dots, sallow
        {.base_r = 0.90, .base_g = 0.70, .base_b = 0.60, .noise_amp = 0.03, .blob_count = 0, .blob_radius = 0.0, .blob_contrast = 0.0},     // normal skin: plain
        {.base_r = 0.72, .base_g = 0.62, .base_b = 0.42, .noise_amp = 0.04, .blob_count = 4, .blob_radius = 3.5, .blob_contrast = 0.30},    // pustule: bright spots, olive
        {.base_r = 0.95, .base_g = 0.88, .base_b = 0.80, .noise_amp = 0.03, .blob_count = 7, .blob_radius = 2.0, .blob_contrast = 0.35},    // whitehead: bright dots, pale
        {.base_r = 0.62, .base_g = 0.46, .base_b = 0.48, .noise_amp = 0.05, .blob_count = 1, .blob_radius = 12.0, .blob_contrast = -0.20},  // nodule: one broad dark region
    };
}

inline SynthSpec default_spec(std::size_t class_count, std::size_t samples_per_class = 200,
                              std::uint64_t seed = 0) {
    SynthSpec spec;
    spec.samples_per_class = samples_per_class;
    spec.seed = seed;
    spec.nonskin = nonskin_texture();
    const auto skins = skin_textures_7();
    if (class_count == 2) {
        spec.classes.push_back({"skin", skins});  // mixture over all skin textures
        spec.classes.push_back({"nonskin", {spec.nonskin}});
    } else if (class_count == 7) {
        const auto& names = class_names_7();
        for (std::size_t i = 0; i < 7; ++i) spec.classes.push_back({names[i], {skins[i]}});
    } else {
        throw ConfigError("default_spec: class count must be 2 or 7");
    }
    return spec;
}

inline Image render_texture(const TextureParams& p, Rng& rng,
                            std::size_t size = kPatchSize) {
    Image img(size, size, 3);
    const double base[3] = {p.base_r, p.base_g, p.base_b};
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c)
            for (std::size_t ch = 0; ch < 3; ++ch)
                img.at(r, c, ch) =
                    std::clamp(base[ch] + rng.uniform(-p.noise_amp, p.noise_amp), 0.0, 1.0);
    for (std::size_t b = 0; b < p.blob_count; ++b) {
        const double cr = rng.uniform(0.0, static_cast<double>(size));
        const double cc = rng.uniform(0.0, static_cast<double>(size));
        const double rad = p.blob_radius * rng.uniform(0.7, 1.3);
        const double rad2 = rad * rad;
        const std::size_t r0 = static_cast<std::size_t>(std::max(0.0, cr - rad - 1));
        const std::size_t r1 = std::min(size, static_cast<std::size_t>(std::max(0.0, cr + rad + 2)));
        const std::size_t c0 = static_cast<std::size_t>(std::max(0.0, cc - rad - 1));
        const std::size_t c1 = std::min(size, static_cast<std::size_t>(std::max(0.0, cc + rad + 2)));
        for (std::size_t r = r0; r < r1; ++r) {
            for (std::size_t c = c0; c < c1; ++c) {
                const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
                if (d2 > rad2) continue;
                const double falloff = 1.0 - d2 / rad2;  // soft edge
                for (std::size_t ch = 0; ch < 3; ++ch)
                    img.at(r, c, ch) =
                        std::clamp(img.at(r, c, ch) + p.blob_contrast * falloff, 0.0, 1.0);
            }
        }
    }
    return img;
}

// Fully seed-determined labeled patch set.
inline std::vector<LabeledPatch> synthesize(const SynthSpec& spec) {
    spec.validate();
    Rng root(spec.seed);
    std::vector<LabeledPatch> patches;
    patches.reserve(spec.classes.size() * spec.samples_per_class);
    for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
        Rng class_rng = root.child(cls);
        for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
            const auto& variants = spec.classes[cls].variants;
            const std::size_t v =
                variants.size() == 1
                    ? 0
                    : static_cast<std::size_t>(class_rng.uniform_int(variants.size()));
            LabeledPatch p;
            p.image = render_texture(variants[v], class_rng);
            p.label = cls;
            p.source_id = spec.classes[cls].name + "/" + std::to_string(i);
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

// Ground truth for a composed scene: -1 marks a non-skin tile.
struct SceneTruth {
    std::vector<std::vector<int>> layout;  // 10x10 of class index or -1
    std::size_t skin_tiles = 0;
    std::vector<double> proportions;  // 7-vector over skin tiles
};

// Builds a 500x500 image from a 10x10 layout of seven-class indices
// (-1 = non-skin), one fresh 50x50 texture patch per tile.
inline std::pair<Image, SceneTruth> compose_scene(const SynthSpec& spec,
                                                  const std::vector<std::vector<int>>& layout,
                                                  std::uint64_t seed) {
    if (layout.size() != 10) throw GeometryError("compose_scene: layout must be 10x10");
    for (const auto& row : layout) {
        if (row.size() != 10) throw GeometryError("compose_scene: layout must be 10x10");
    }
    const auto skins = skin_textures_7();
    Image scene(500, 500, 3);
    SceneTruth truth;
    truth.layout = layout;
    truth.proportions.assign(7, 0.0);
    Rng root(seed);
    std::size_t tile_index = 0;
    for (std::size_t tr = 0; tr < 10; ++tr) {
        for (std::size_t tc = 0; tc < 10; ++tc, ++tile_index) {
            const int cls = layout[tr][tc];
            if (cls < -1 || cls > 6) {
                throw GeometryError("compose_scene: layout class " + std::to_string(cls) +
                                    " out of range at tile (" + std::to_string(tr) + "," +
                                    std::to_string(tc) + ")");
            }
            Rng tile_rng = root.child(tile_index);
            const TextureParams& params =
                cls == -1 ? spec.nonskin : skins[static_cast<std::size_t>(cls)];
            const Image patch = render_texture(params, tile_rng);
            for (std::size_t r = 0; r < kPatchSize; ++r)
                for (std::size_t c = 0; c < kPatchSize; ++c)
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        scene.at(tr * kPatchSize + r, tc * kPatchSize + c, ch) =
                            patch.at(r, c, ch);
            if (cls >= 0) {
                ++truth.skin_tiles;
                truth.proportions[static_cast<std::size_t>(cls)] += 1.0;
            }
        }
    }
    if (truth.skin_tiles > 0) {
        for (double& p : truth.proportions) p /= static_cast<double>(truth.skin_tiles);
    }
    return {std::move(scene), std::move(truth)};
}

// ---- directory-per-class corpus ingestion ----

struct CorpusManifest {
    std::vector<std::string> class_names;   // lexicographic directory order
    std::vector<std::size_t> class_counts;
    std::uint64_t split_seed = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
    std::vector<std::string> warnings;  // unreadable / wrong-size files
};

struct Corpus {
    CorpusManifest manifest;
    std::vector<LabeledPatch> patches;
};

// Reads <root>/<class>/<file>.ppm; class index follows lexicographic
// directory order, files are visited in lexicographic order. Non-50x50 or
// unreadable files are recorded as warnings, not fatal.
inline Corpus ingest(const std::filesystem::path& root, double train_fraction = 0.7,
                     std::uint64_t split_seed = 0) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw IoError("ingest: not a directory: " + root.string());
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw DataError("ingest: no class directories under " + root.string());

    Corpus corpus;
    corpus.manifest.split_seed = split_seed;
    for (std::size_t cls = 0; cls < class_dirs.size(); ++cls) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(class_dirs[cls])) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::size_t loaded = 0;
        for (const auto& f : files) {
            try {
                Image img = read_pnm(f);
                if (img.height != kPatchSize || img.width != kPatchSize || img.channels != 3) {
                    corpus.manifest.warnings.push_back(f.string() + ": not a 50x50 color image");
                    continue;
                }
                LabeledPatch p;
                p.image = std::move(img);
                p.label = cls;
                p.source_id = f.string();
                corpus.patches.push_back(std::move(p));
                ++loaded;
            } catch (const Error& err) {
                corpus.manifest.warnings.push_back(f.string() + ": " + err.what());
            }
        }
        if (loaded == 0) {
            throw DataError("ingest: class directory '" + class_dirs[cls].string() +
                            "' has no readable 50x50 images");
        }
        corpus.manifest.class_names.push_back(class_dirs[cls].filename().string());
        corpus.manifest.class_counts.push_back(loaded);
    }

    std::vector<std::size_t> labels(corpus.patches.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = corpus.patches[i].label;
    Rng rng(split_seed);
    stratified_split(labels, train_fraction, rng, corpus.manifest.train_indices,
                     corpus.manifest.val_indices);
    return corpus;
}

}  // namespace tilepath
