#pragma once
#include <string>
#include <vector>

#include "tilepath/gradcheck.hpp"
#include "tilepath/model.hpp"

namespace tilepath {

struct LayerCheckResult {
    std::string layer;
    std::string kind;
    std::string target;  // "weights", "bias" or "input"
    double max_rel_err = 0.0;
    bool pass = false;
};

namespace detail {

// Random tensor kept away from ReLU's kink and maxpool ties.
inline Tensor off_kink_input(const std::vector<std::size_t>& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.data()) {
        v = rng.uniform(-1.0, 1.0);
        if (std::fabs(v) < 0.05) v += v < 0.0 ? -0.05 : 0.05;
    }
    return t;
}

}  // namespace detail

// Finite-difference check of one layer in isolation. The scalar objective is
// sum(r . layer(x)) for a fixed random projection r, except softmax which is
// composed with cross-entropy. Dropout runs in train mode with a re-seeded
// Rng per evaluation so the mask is fixed.
inline std::vector<LayerCheckResult> gradcheck_layer(
    const Layer& layer, const std::vector<std::size_t>& input_shape, std::uint64_t seed,
    double epsilon = 1e-5, std::size_t max_coords = 64, double tolerance = 1e-4,
    double corruption = 0.0) {
    Rng rng(seed);
    const Tensor input = detail::off_kink_input(input_shape, rng);
    const auto out_shape = layer.output_shape(input_shape);
    Tensor projection(out_shape);
    for (double& v : projection.data()) v = rng.uniform(-1.0, 1.0);
    const std::size_t label = 0;
    const std::uint64_t dropout_seed = rng.next_u64();

    const bool is_softmax = layer.kind == LayerKind::Softmax;
    auto objective = [&](const Layer& l, const Tensor& x) {
        Rng drop_rng(dropout_seed);
        const Tensor out = layer_forward(l, x, Mode::Train, &drop_rng, nullptr);
        if (is_softmax) return cross_entropy(out, label);
        double acc = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) acc += projection[i] * out[i];
        return acc;
    };

    // analytic gradients via one cached forward + backward
    LayerCache cache;
    Rng drop_rng(dropout_seed);
    const Tensor out = layer_forward(layer, input, Mode::Train, &drop_rng, &cache);
    const Tensor dout = is_softmax ? cross_entropy_grad(out, label) : projection;
    LayerGrads grads;
    const Tensor dinput =
        layer_backward(layer, dout, cache, layer.has_params() ? &grads : nullptr);

    std::vector<LayerCheckResult> results;
    auto run = [&](const std::string& target, const Tensor& point, Tensor analytic,
                   const std::function<double(const Tensor&)>& f) {
        // perturb every coordinate so the failure shows no matter which
        // subset the checker samples
        if (corruption != 0.0) {
            for (double& v : analytic.data()) v += corruption;
        }
        LayerCheckResult r;
        r.layer = layer.name;
        r.kind = layer_kind_name(layer.kind);
        r.target = target;
        r.max_rel_err = grad_check(f, point, analytic, epsilon, max_coords, seed);
        r.pass = r.max_rel_err < tolerance;
        results.push_back(r);
    };

    run("input", input, dinput, [&](const Tensor& x) { return objective(layer, x); });
    if (layer.has_params()) {
        run("weights", layer.weights, grads.dweights, [&](const Tensor& w) {
            Layer probe = layer;
            probe.weights = w;
            return objective(probe, input);
        });
        run("bias", layer.bias, grads.dbias, [&](const Tensor& b) {
            Layer probe = layer;
            probe.bias = b;
            return objective(probe, input);
        });
    }
    return results;
}

// Checks every layer of an architecture at its real in-network shape.
// `corruption`, when nonzero, perturbs the analytic gradient of the first
// checked layer; it exists so the failure path itself can be tested.
inline std::vector<LayerCheckResult> gradcheck_model(const Model& model, std::uint64_t seed,
                                                     double epsilon = 1e-5,
                                                     std::size_t max_coords = 64,
                                                     double tolerance = 1e-4,
                                                     double corruption = 0.0) {
    Model m = model;
    Rng init_rng(seed);
    init_weights(m, init_rng);
    std::vector<LayerCheckResult> results;
    auto shape = m.input_shape;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const double corrupt_here = (corruption != 0.0 && i == 0) ? corruption : 0.0;
        auto layer_results = gradcheck_layer(m.layers[i], shape, seed + i, epsilon,
                                             max_coords, tolerance, corrupt_here);
        results.insert(results.end(), layer_results.begin(), layer_results.end());
        shape = m.layers[i].output_shape(shape);
    }
    return results;
}

}  // namespace tilepath
