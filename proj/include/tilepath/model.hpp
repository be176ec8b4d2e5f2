#pragma once
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tilepath/image.hpp"
#include "tilepath/layers.hpp"

namespace tilepath {

// Architecture ids:
//   vgg16_headless    - VGG16 conv stack without top layers, 50x50x3 -> 1x1x512
//   tiny_cnn          - small 3-conv binary network, 50x50x3 -> 2
//   classifier_head_2 - 512 feature vector -> 2
//   classifier_head_7 - 512 feature vector -> 7
struct Model {
    std::string name;
    std::vector<std::size_t> input_shape;
    std::vector<Layer> layers;
    PoolRounding pooling_rounding = PoolRounding::Floor;

    std::vector<std::size_t> output_shape() const {
        auto shape = input_shape;
        for (const auto& l : layers) shape = l.output_shape(shape);
        return shape;
    }

    void validate_shapes() const { (void)output_shape(); }
};

inline Model build_architecture(const std::string& name) {
    Model m;
    m.name = name;
    if (name == "vgg16_headless") {
        m.input_shape = {50, 50, 3};
        m.pooling_rounding = PoolRounding::Floor;
        const std::vector<std::vector<std::size_t>> blocks = {
            {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
        std::size_t in_ch = 3;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            for (std::size_t i = 0; i < blocks[b].size(); ++i) {
                const std::string base =
                    "block" + std::to_string(b + 1) + "_conv" + std::to_string(i + 1);
                m.layers.push_back(Layer::conv2d(base, in_ch, blocks[b][i]));
                m.layers.push_back(Layer::relu(base + "_relu"));
                in_ch = blocks[b][i];
            }
            m.layers.push_back(Layer::maxpool2d("block" + std::to_string(b + 1) + "_pool",
                                                PoolRounding::Floor));
        }
    } else if (name == "tiny_cnn") {
        m.input_shape = {50, 50, 3};
        m.pooling_rounding = PoolRounding::Ceil;
        m.layers.push_back(Layer::conv2d("block1_conv1", 3, 64));
        m.layers.push_back(Layer::relu("block1_conv1_relu"));
        m.layers.push_back(Layer::conv2d("block1_conv2", 64, 64));
        m.layers.push_back(Layer::relu("block1_conv2_relu"));
        m.layers.push_back(Layer::maxpool2d("block1_pool", PoolRounding::Ceil));
        m.layers.push_back(Layer::conv2d("block2_conv1", 64, 64));
        m.layers.push_back(Layer::relu("block2_conv1_relu"));
        m.layers.push_back(Layer::maxpool2d("block2_pool", PoolRounding::Ceil));
        m.layers.push_back(Layer::dropout("dropout1", 0.5));
        m.layers.push_back(Layer::flatten("flatten1"));
        m.layers.push_back(Layer::dense("dense1", 10816, 128));
        m.layers.push_back(Layer::relu("dense1_relu"));
        m.layers.push_back(Layer::dropout("dropout2", 0.5));
        m.layers.push_back(Layer::dense("dense2", 128, 2));
        m.layers.push_back(Layer::softmax("softmax"));
    } else if (name == "classifier_head_2" || name == "classifier_head_7") {
        const std::size_t classes = name.back() == '2' ? 2 : 7;
        m.input_shape = {512, 1, 1};
        m.layers.push_back(Layer::flatten("flatten1"));
        m.layers.push_back(Layer::dense("dense1", 512, 256));
        m.layers.push_back(Layer::relu("dense1_relu"));
        m.layers.push_back(Layer::dropout("dropout1", 0.5));
        m.layers.push_back(Layer::dense("dense2", 256, classes));
        m.layers.push_back(Layer::softmax("softmax"));
    } else {
        throw ConfigError("unknown architecture id: " + name);
    }
    m.validate_shapes();
    return m;
}

// Kaiming-uniform fan-in initialization: U(-sqrt(6/fan_in), sqrt(6/fan_in)),
// biases zero. Deterministic for a given rng seed.
inline void init_weights(Model& m, Rng& rng) {
    for (auto& l : m.layers) {
        if (!l.has_params()) continue;
        const std::size_t fan_in =
            l.kind == LayerKind::Conv2d ? 9 * l.in_channels : l.in_features;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& w : l.weights.data()) w = rng.uniform(-limit, limit);
        for (double& b : l.bias.data()) b = 0.0;
    }
}

inline Tensor forward(const Model& m, const Tensor& input, Mode mode = Mode::Infer,
                      Rng* rng = nullptr, std::vector<LayerCache>* caches = nullptr) {
    if (input.shape() != m.input_shape) {
        throw DimensionError(m.name + ": input shape " + Tensor::shape_str(input.shape()) +
                             " does not match expected " +
                             Tensor::shape_str(m.input_shape));
    }
    if (caches) caches->resize(m.layers.size());
    Tensor x = input;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        x = layer_forward(m.layers[i], x, mode, rng, caches ? &(*caches)[i] : nullptr);
    }
    return x;
}

struct ModelGrads {
    std::vector<LayerGrads> per_layer;  // aligned with model.layers
    Tensor input_grad;
};

// loss_grad is dLoss/dOutput of the model's last layer.
inline ModelGrads backward(const Model& m, const Tensor& loss_grad,
                           const std::vector<LayerCache>& caches) {
    if (caches.size() != m.layers.size()) {
        throw StateError("backward: cache count " + std::to_string(caches.size()) +
                         " does not match layer count " + std::to_string(m.layers.size()));
    }
    ModelGrads grads;
    grads.per_layer.resize(m.layers.size());
    Tensor d = loss_grad;
    for (std::size_t i = m.layers.size(); i-- > 0;) {
        const Layer& l = m.layers[i];
        if (caches[i].input.numel() == 0) {
            throw StateError("backward: stale cache for layer " + l.name);
        }
        d = layer_backward(l, d, caches[i], l.has_params() ? &grads.per_layer[i] : nullptr);
    }
    grads.input_grad = d;
    return grads;
}

inline double cross_entropy(const Tensor& probs, std::size_t label) {
    if (label >= probs.numel()) {
        throw DataError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(probs.numel()) + " classes");
    }
    return -std::log(std::max(probs[label], 1e-12));
}

inline Tensor cross_entropy_grad(const Tensor& probs, std::size_t label) {
    Tensor g(probs.shape());
    g[label] = -1.0 / std::max(probs[label], 1e-12);
    return g;
}

// 512-dim feature vector from the headless extractor on a normalized 50x50x3 image.
inline Tensor extract_features(const Model& extractor, const Image& img) {
    if (img.height != 50 || img.width != 50 || img.channels != 3) {
        throw DimensionError("extract_features: expected 50x50x3 image, got " +
                             std::to_string(img.height) + "x" + std::to_string(img.width) +
                             "x" + std::to_string(img.channels));
    }
    Tensor out = forward(extractor, img.to_tensor(), Mode::Infer);
    if (out.numel() != 512) {
        throw DimensionError("extract_features: extractor emitted " +
                             std::to_string(out.numel()) + " values, expected 512");
    }
    if (!out.all_finite()) throw ValidationError("extract_features: non-finite feature");
    return out.reshape({512, 1, 1});
}

// ---- weight file format ----
// little-endian binary: magic "TPWF", version u32, architecture id
// (u32 length + UTF-8 bytes), tensor count u32, then per tensor:
// name (u32 length + bytes), rank u32, extents u32 each, f32 data.

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "weight file writer assumes a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError("weight file: truncated");
    return v;
}
inline std::string get_str(std::istream& in) {
    const std::uint32_t n = get_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw FormatError("weight file: truncated string");
    return s;
}

}  // namespace detail

inline void save_weights(const Model& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_weights: cannot open " + path.string());
    out.write("TPWF", 4);
    detail::put_u32(out, 1);
    detail::put_str(out, m.name);
    std::uint32_t count = 0;
    for (const auto& l : m.layers)
        if (l.has_params()) count += 2;
    detail::put_u32(out, count);
    auto put_tensor = [&](const std::string& name, const Tensor& t) {
        detail::put_str(out, name);
        detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t e : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
        std::vector<float> buf(t.numel());
        for (std::size_t i = 0; i < t.numel(); ++i) buf[i] = static_cast<float>(t[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * 4));
    };
    for (const auto& l : m.layers) {
        if (!l.has_params()) continue;
        put_tensor(l.name + "/weight", l.weights);
        put_tensor(l.name + "/bias", l.bias);
    }
    if (!out) throw IoError("save_weights: write failed for " + path.string());
}

inline Model load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_weights: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TPWF", 4) != 0) {
        throw FormatError("load_weights: bad magic in " + path.string());
    }
    const std::uint32_t version = detail::get_u32(in);
    if (version != 1) {
        throw FormatError("load_weights: unsupported version " + std::to_string(version));
    }
    const std::string arch = detail::get_str(in);
    Model m = build_architecture(arch);
    std::uint32_t expected = 0;
    for (const auto& l : m.layers)
        if (l.has_params()) expected += 2;
    const std::uint32_t count = detail::get_u32(in);
    if (count != expected) {
        throw FormatError("load_weights: tensor count " + std::to_string(count) +
                          " does not match architecture " + arch + " (expected " +
                          std::to_string(expected) + ")");
    }
    auto get_tensor = [&](const std::string& want_name, Tensor& dst) {
        const std::string name = detail::get_str(in);
        if (name != want_name) {
            throw FormatError("load_weights: tensor '" + name + "' where '" + want_name +
                              "' expected");
        }
        const std::uint32_t rank = detail::get_u32(in);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = detail::get_u32(in);
        if (shape != dst.shape()) {
            throw FormatError("load_weights: tensor '" + name + "' has shape " +
                              Tensor::shape_str(shape) + ", architecture expects " +
                              Tensor::shape_str(dst.shape()));
        }
        std::vector<float> buf(dst.numel());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * 4));
        if (!in) throw FormatError("load_weights: truncated tensor data for '" + name + "'");
        for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] = buf[i];
    };
    for (auto& l : m.layers) {
        if (!l.has_params()) continue;
        get_tensor(l.name + "/weight", l.weights);
        get_tensor(l.name + "/bias", l.bias);
    }
    return m;
}

}  // namespace tilepath
