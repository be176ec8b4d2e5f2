#pragma once
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "tilepath/model.hpp"

namespace tilepath {

struct Sample {
    Tensor input;
    std::size_t label = 0;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    bool use_momentum = false;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;

    void validate() const {
        if (epochs == 0 || batch_size == 0) throw ConfigError("train: epochs and batch_size must be positive");
        if (learning_rate < 0.0) throw ConfigError("train: learning rate must be non-negative");
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
        if (train_fraction <= 0.0 || train_fraction >= 1.0) throw ConfigError("train: train_fraction must be in (0,1)");
    }
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> val_indices;
};

// Per-class 70/30 (configurable) split. round(n * fraction) per class.
inline void stratified_split(const std::vector<std::size_t>& labels, double fraction,
                             Rng& rng, std::vector<std::size_t>& train,
                             std::vector<std::size_t>& val) {
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    train.clear();
    val.clear();
    for (auto& [cls, idx] : by_class) {
        for (std::size_t i = idx.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
            std::swap(idx[i - 1], idx[j]);
        }
        const std::size_t n_train =
            static_cast<std::size_t>(std::lround(static_cast<double>(idx.size()) * fraction));
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_train ? train : val).push_back(idx[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
}

inline std::pair<double, double> evaluate_loss_acc(const Model& m,
                                                   const std::vector<Sample>& data,
                                                   const std::vector<std::size_t>& indices) {
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i : indices) {
        const Tensor probs = forward(m, data[i].input, Mode::Infer);
        loss += cross_entropy(probs, data[i].label);
        if (argmax(probs) == data[i].label) ++correct;
    }
    const double n = indices.empty() ? 1.0 : static_cast<double>(indices.size());
    return {loss / n, static_cast<double>(correct) / n};
}

// SGD (optionally with momentum) on softmax cross-entropy. Splits the dataset
// 70/30 per class with cfg.seed before the first epoch, shuffles the training
// set each epoch, and averages gradients over each mini-batch. Deterministic
// for a fixed seed.
inline TrainLog train(Model& m, const std::vector<Sample>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) throw DataError("train: dataset is empty");
    const std::size_t n_classes = m.output_shape().back();
    std::vector<std::size_t> labels(dataset.size());
    std::map<std::size_t, std::size_t> class_counts;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].label >= n_classes) {
            throw DataError("train: label " + std::to_string(dataset[i].label) +
                            " out of range for " + std::to_string(n_classes) + " classes");
        }
        labels[i] = dataset[i].label;
        ++class_counts[dataset[i].label];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (class_counts[c] == 0) {
            throw DataError("train: class " + std::to_string(c) + " has no samples");
        }
    }

    Rng root(cfg.seed);
    Rng split_rng(cfg.seed);  // same construction as datagen's manifest split
    Rng shuffle_rng = root.child(1);
    Rng dropout_rng = root.child(2);

    TrainLog log;
    stratified_split(labels, cfg.train_fraction, split_rng, log.train_indices,
                     log.val_indices);

    // momentum velocity buffers
    std::vector<LayerGrads> velocity(m.layers.size());
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        if (m.layers[i].has_params()) {
            velocity[i].dweights = Tensor(m.layers[i].weights.shape());
            velocity[i].dbias = Tensor(m.layers[i].bias.shape());
        }
    }

    std::vector<std::size_t> order = log.train_indices;
    std::vector<LayerCache> caches;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(i));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<LayerGrads> accum(m.layers.size());
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = dataset[order[b]];
                const Tensor probs = forward(m, s.input, Mode::Train, &dropout_rng, &caches);
                epoch_loss += cross_entropy(probs, s.label);
                if (argmax(probs) == s.label) ++epoch_correct;
                const ModelGrads g = backward(m, cross_entropy_grad(probs, s.label), caches);
                for (std::size_t i = 0; i < m.layers.size(); ++i) {
                    if (!m.layers[i].has_params()) continue;
                    if (accum[i].dweights.numel() == 0) {
                        accum[i] = g.per_layer[i];
                    } else {
                        accum[i].dweights = add(accum[i].dweights, g.per_layer[i].dweights);
                        accum[i].dbias = add(accum[i].dbias, g.per_layer[i].dbias);
                    }
                }
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = 0; i < m.layers.size(); ++i) {
                if (!m.layers[i].has_params()) continue;
                Layer& l = m.layers[i];
                if (cfg.use_momentum) {
                    for (std::size_t k = 0; k < l.weights.numel(); ++k) {
                        velocity[i].dweights[k] = cfg.momentum * velocity[i].dweights[k] +
                                                  accum[i].dweights[k] * scale;
                        l.weights[k] -= cfg.learning_rate * velocity[i].dweights[k];
                    }
                    for (std::size_t k = 0; k < l.bias.numel(); ++k) {
                        velocity[i].dbias[k] = cfg.momentum * velocity[i].dbias[k] +
                                               accum[i].dbias[k] * scale;
                        l.bias[k] -= cfg.learning_rate * velocity[i].dbias[k];
                    }
                } else {
                    for (std::size_t k = 0; k < l.weights.numel(); ++k)
                        l.weights[k] -= cfg.learning_rate * accum[i].dweights[k] * scale;
                    for (std::size_t k = 0; k < l.bias.numel(); ++k)
                        l.bias[k] -= cfg.learning_rate * accum[i].dbias[k] * scale;
                }
            }
        }
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.train_loss = order.empty() ? 0.0 : epoch_loss / static_cast<double>(order.size());
        stats.train_acc =
            order.empty() ? 0.0 : static_cast<double>(epoch_correct) / static_cast<double>(order.size());
        const auto [vl, va] = evaluate_loss_acc(m, dataset, log.val_indices);
        stats.val_loss = vl;
        stats.val_acc = va;
        log.epochs.push_back(stats);
    }
    return log;
}

inline void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_train_log_csv: cannot open " + path.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char buf[256];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        out << buf;
    }
}

}  // namespace tilepath
