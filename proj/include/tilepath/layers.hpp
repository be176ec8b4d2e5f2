#pragma once
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tilepath/errors.hpp"
#include "tilepath/rng.hpp"
#include "tilepath/tensor.hpp"

namespace tilepath {

enum class LayerKind { Conv2d, MaxPool2d, Dense, Dropout, Flatten, Relu, Softmax };
enum class PoolRounding { Floor, Ceil };
enum class Mode { Train, Infer };

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Dense: return "dense";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Relu: return "relu";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

// All convs are 3x3, stride 1, 'same' zero padding; all pools 2x2 stride 2.
struct Layer {
    LayerKind kind;
    std::string name;
    std::size_t in_channels = 0, out_channels = 0;  // conv
    std::size_t in_features = 0, out_features = 0;  // dense
    double drop_prob = 0.5;                         // dropout
    PoolRounding rounding = PoolRounding::Floor;    // maxpool
    Tensor weights;  // conv: (9*in_ch, out_ch); dense: (in, out)
    Tensor bias;     // (out)

    bool has_params() const {
        return kind == LayerKind::Conv2d || kind == LayerKind::Dense;
    }

    static Layer conv2d(std::string name, std::size_t in_ch, std::size_t out_ch) {
        Layer l;
        l.kind = LayerKind::Conv2d;
        l.name = std::move(name);
        l.in_channels = in_ch;
        l.out_channels = out_ch;
        l.weights = Tensor({9 * in_ch, out_ch});
        l.bias = Tensor({out_ch});
        return l;
    }
    static Layer maxpool2d(std::string name, PoolRounding r) {
        Layer l;
        l.kind = LayerKind::MaxPool2d;
        l.name = std::move(name);
        l.rounding = r;
        return l;
    }
    static Layer dense(std::string name, std::size_t in, std::size_t out) {
        Layer l;
        l.kind = LayerKind::Dense;
        l.name = std::move(name);
        l.in_features = in;
        l.out_features = out;
        l.weights = Tensor({in, out});
        l.bias = Tensor({out});
        return l;
    }
    static Layer dropout(std::string name, double p) {
        if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1)");
        Layer l;
        l.kind = LayerKind::Dropout;
        l.name = std::move(name);
        l.drop_prob = p;
        return l;
    }
    static Layer flatten(std::string name) {
        Layer l;
        l.kind = LayerKind::Flatten;
        l.name = std::move(name);
        return l;
    }
    static Layer relu(std::string name) {
        Layer l;
        l.kind = LayerKind::Relu;
        l.name = std::move(name);
        return l;
    }
    static Layer softmax(std::string name) {
        Layer l;
        l.kind = LayerKind::Softmax;
        l.name = std::move(name);
        return l;
    }

    std::vector<std::size_t> output_shape(const std::vector<std::size_t>& in) const {
        switch (kind) {
            case LayerKind::Conv2d:
                if (in.size() != 3 || in[2] != in_channels) {
                    throw DimensionError(name + ": expected HxWx" +
                                         std::to_string(in_channels) + " input, got " +
                                         Tensor::shape_str(in));
                }
                return {in[0], in[1], out_channels};
            case LayerKind::MaxPool2d: {
                if (in.size() != 3) {
                    throw DimensionError(name + ": maxpool expects rank-3 input, got " +
                                         Tensor::shape_str(in));
                }
                auto half = [&](std::size_t n) {
                    return rounding == PoolRounding::Floor ? n / 2 : (n + 1) / 2;
                };
                return {half(in[0]), half(in[1]), in[2]};
            }
            case LayerKind::Dense:
                if (in.size() != 1 || in[0] != in_features) {
                    throw DimensionError(name + ": expected " + std::to_string(in_features) +
                                         " features, got " + Tensor::shape_str(in));
                }
                return {out_features};
            case LayerKind::Flatten:
                return {Tensor::numel_of(in)};
            case LayerKind::Dropout:
            case LayerKind::Relu:
            case LayerKind::Softmax:
                return in;
        }
        throw StateError("unreachable layer kind");
    }
};

struct LayerCache {
    Tensor input;
    Tensor cols;                       // conv im2col matrix
    std::vector<std::size_t> argmax;   // maxpool winner (flat input index per output)
    std::vector<double> mask;          // dropout keep mask, already 1/(1-p) scaled
    Tensor output;                     // softmax probs
};

namespace detail {

inline void im2col_3x3_same(const Tensor& in, Tensor& cols) {
    const std::size_t h = in.shape()[0], w = in.shape()[1], cin = in.shape()[2];
    cols = Tensor({h * w, 9 * cin});
    double* out = cols.data().data();
    const double* src = in.data().data();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            double* row = out + (r * w + c) * 9 * cin;
            std::size_t k = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + dr;
                for (int dc = -1; dc <= 1; ++dc) {
                    const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h) || cc < 0 ||
                        cc >= static_cast<std::ptrdiff_t>(w)) {
                        for (std::size_t ch = 0; ch < cin; ++ch) row[k++] = 0.0;
                    } else {
                        const double* px = src + (static_cast<std::size_t>(rr) * w +
                                                  static_cast<std::size_t>(cc)) * cin;
                        for (std::size_t ch = 0; ch < cin; ++ch) row[k++] = px[ch];
                    }
                }
            }
        }
    }
}

inline void col2im_3x3_same(const Tensor& dcols, std::size_t h, std::size_t w,
                            std::size_t cin, Tensor& dinput) {
    dinput = Tensor({h, w, cin});
    double* dst = dinput.data().data();
    const double* src = dcols.data().data();
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double* row = src + (r * w + c) * 9 * cin;
            std::size_t k = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r) + dr;
                for (int dc = -1; dc <= 1; ++dc) {
                    const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h) || cc < 0 ||
                        cc >= static_cast<std::ptrdiff_t>(w)) {
                        k += cin;
                    } else {
                        double* px = dst + (static_cast<std::size_t>(rr) * w +
                                            static_cast<std::size_t>(cc)) * cin;
                        for (std::size_t ch = 0; ch < cin; ++ch) px[ch] += row[k++];
                    }
                }
            }
        }
    }
}

}  // namespace detail

inline Tensor layer_forward(const Layer& layer, const Tensor& input, Mode mode,
                            Rng* rng, LayerCache* cache) {
    const auto out_shape = layer.output_shape(input.shape());
    if (cache) cache->input = input;
    switch (layer.kind) {
        case LayerKind::Conv2d: {
            const std::size_t h = input.shape()[0], w = input.shape()[1];
            Tensor cols;
            detail::im2col_3x3_same(input, cols);
            Tensor out({h * w, layer.out_channels});
            matmul_raw(cols.data().data(), layer.weights.data().data(),
                       out.data().data(), h * w, 9 * layer.in_channels,
                       layer.out_channels);
            for (std::size_t i = 0; i < h * w; ++i)
                for (std::size_t j = 0; j < layer.out_channels; ++j)
                    out.at2(i, j) += layer.bias[j];
            if (cache) cache->cols = std::move(cols);
            return out.reshape(out_shape);
        }
        case LayerKind::MaxPool2d: {
            const std::size_t h = input.shape()[0], w = input.shape()[1],
                              ch = input.shape()[2];
            Tensor out(out_shape);
            const std::size_t oh = out_shape[0], ow = out_shape[1];
            std::vector<std::size_t> winners(oh * ow * ch);
            for (std::size_t r = 0; r < oh; ++r) {
                for (std::size_t c = 0; c < ow; ++c) {
                    const std::size_t r1 = std::min(2 * r + 2, h);
                    const std::size_t c1 = std::min(2 * c + 2, w);
                    for (std::size_t k = 0; k < ch; ++k) {
                        double best = -std::numeric_limits<double>::infinity();
                        std::size_t best_idx = 0;
                        for (std::size_t rr = 2 * r; rr < r1; ++rr) {
                            for (std::size_t cc = 2 * c; cc < c1; ++cc) {
                                const std::size_t idx = (rr * w + cc) * ch + k;
                                if (input[idx] > best) {
                                    best = input[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.at3(r, c, k) = best;
                        winners[(r * ow + c) * ch + k] = best_idx;
                    }
                }
            }
            if (cache) cache->argmax = std::move(winners);
            return out;
        }
        case LayerKind::Dense: {
            Tensor out({layer.out_features});
            matmul_at_b(layer.weights.data().data(), input.data().data(),
                        out.data().data(), layer.in_features, layer.out_features, 1);
            for (std::size_t j = 0; j < layer.out_features; ++j) out[j] += layer.bias[j];
            return out;
        }
        case LayerKind::Dropout: {
            if (mode == Mode::Infer) {
                if (cache) cache->mask.clear();
                return input;
            }
            if (!rng) throw ConfigError(layer.name + ": dropout in train mode needs an Rng");
            const double keep_scale = 1.0 / (1.0 - layer.drop_prob);
            Tensor out(input.shape());
            std::vector<double> mask(input.numel());
            for (std::size_t i = 0; i < input.numel(); ++i) {
                mask[i] = rng->bernoulli(layer.drop_prob) ? 0.0 : keep_scale;
                out[i] = input[i] * mask[i];
            }
            if (cache) cache->mask = std::move(mask);
            return out;
        }
        case LayerKind::Flatten:
            return input.reshape(out_shape);
        case LayerKind::Relu: {
            Tensor out(input.shape());
            for (std::size_t i = 0; i < input.numel(); ++i)
                out[i] = input[i] > 0.0 ? input[i] : 0.0;
            return out;
        }
        case LayerKind::Softmax: {
            // max subtraction keeps exp in range for |logit| <= ~700
            const double m = reduce_max(input);
            Tensor out(input.shape());
            double z = 0.0;
            for (std::size_t i = 0; i < input.numel(); ++i) {
                out[i] = std::exp(input[i] - m);
                z += out[i];
            }
            for (std::size_t i = 0; i < input.numel(); ++i) out[i] /= z;
            if (cache) cache->output = out;
            return out;
        }
    }
    throw StateError("unreachable layer kind");
}

struct LayerGrads {
    Tensor dweights;
    Tensor dbias;
};

// Returns gradient w.r.t. the layer input; fills grads for parameterized layers.
inline Tensor layer_backward(const Layer& layer, const Tensor& dout,
                             const LayerCache& cache, LayerGrads* grads) {
    switch (layer.kind) {
        case LayerKind::Conv2d: {
            const std::size_t h = cache.input.shape()[0], w = cache.input.shape()[1];
            const std::size_t hw = h * w, kc = 9 * layer.in_channels;
            const Tensor dout2 = dout.reshape({hw, layer.out_channels});
            if (grads) {
                grads->dweights = Tensor({kc, layer.out_channels});
                matmul_at_b(cache.cols.data().data(), dout2.data().data(),
                            grads->dweights.data().data(), hw, kc, layer.out_channels);
                grads->dbias = Tensor({layer.out_channels});
                for (std::size_t i = 0; i < hw; ++i)
                    for (std::size_t j = 0; j < layer.out_channels; ++j)
                        grads->dbias[j] += dout2.at2(i, j);
            }
            Tensor dcols({hw, kc});
            matmul_a_bt(dout2.data().data(), layer.weights.data().data(),
                        dcols.data().data(), hw, layer.out_channels, kc);
            Tensor dinput;
            detail::col2im_3x3_same(dcols, h, w, layer.in_channels, dinput);
            return dinput;
        }
        case LayerKind::MaxPool2d: {
            Tensor dinput(cache.input.shape());
            for (std::size_t i = 0; i < dout.numel(); ++i)
                dinput[cache.argmax[i]] += dout[i];
            return dinput;
        }
        case LayerKind::Dense: {
            if (grads) {
                grads->dweights = Tensor({layer.in_features, layer.out_features});
                for (std::size_t i = 0; i < layer.in_features; ++i)
                    for (std::size_t j = 0; j < layer.out_features; ++j)
                        grads->dweights.at2(i, j) = cache.input[i] * dout[j];
                grads->dbias = dout;
            }
            Tensor dinput({layer.in_features});
            matmul_raw(layer.weights.data().data(), dout.data().data(),
                       dinput.data().data(), layer.in_features, layer.out_features, 1);
            return dinput;
        }
        case LayerKind::Dropout: {
            if (cache.mask.empty()) return dout;  // infer mode: identity
            Tensor dinput(dout.shape());
            for (std::size_t i = 0; i < dout.numel(); ++i)
                dinput[i] = dout[i] * cache.mask[i];
            return dinput;
        }
        case LayerKind::Flatten:
            return dout.reshape(cache.input.shape());
        case LayerKind::Relu: {
            Tensor dinput(dout.shape());
            for (std::size_t i = 0; i < dout.numel(); ++i)
                dinput[i] = cache.input[i] > 0.0 ? dout[i] : 0.0;
            return dinput;
        }
        case LayerKind::Softmax: {
            const Tensor& p = cache.output;
            double dot = 0.0;
            for (std::size_t i = 0; i < p.numel(); ++i) dot += p[i] * dout[i];
            Tensor dinput(dout.shape());
            for (std::size_t i = 0; i < p.numel(); ++i)
                dinput[i] = p[i] * (dout[i] - dot);
            return dinput;
        }
    }
    throw StateError("unreachable layer kind");
}

}  // namespace tilepath
