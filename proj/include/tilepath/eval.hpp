#pragma once
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tilepath/errors.hpp"

namespace tilepath {

struct ScoredSample {
    double score = 0.0;  // positive-class probability
    bool positive = false;
};

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

struct RocAnalysis {
    std::vector<RocPoint> points;  // strictest threshold first
    double auc = 0.0;
    double youden_j = 0.0;
    double best_threshold = 0.0;
    double acc = 0.0, sen = 0.0, spe = 0.0;  // at best_threshold
};

struct BinaryCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Prediction rule everywhere: positive iff score >= threshold.
inline BinaryCounts count_at_threshold(const std::vector<ScoredSample>& samples,
                                       double threshold) {
    BinaryCounts c;
    for (const auto& s : samples) {
        const bool pred = s.score >= threshold;
        if (s.positive) {
            pred ? ++c.tp : ++c.fn;
        } else {
            pred ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

struct AccSenSpe {
    double acc = 0.0, sen = 0.0, spe = 0.0;
};

inline AccSenSpe acc_sen_spe(const std::vector<ScoredSample>& samples, double threshold) {
    const BinaryCounts c = count_at_threshold(samples, threshold);
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0) {
        throw DataError("acc_sen_spe: needs at least one positive and one negative sample");
    }
    AccSenSpe r;
    r.sen = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.spe = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    r.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(samples.size());
    return r;
}

// Threshold sweep at every distinct score plus a +inf sentinel, trapezoidal
// AUC over (FPR, TPR), Youden J = max(TPR - FPR) with ties broken toward the
// higher (stricter) threshold. The sentinel point is not a Youden candidate.
inline RocAnalysis roc_curve(const std::vector<ScoredSample>& samples) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : samples) (s.positive ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("roc_curve: needs at least one positive and one negative sample");
    }

    std::vector<double> thresholds;
    thresholds.reserve(samples.size());
    for (const auto& s : samples) thresholds.push_back(s.score);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    RocAnalysis roc;
    roc.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    // cumulative counts while loosening the threshold
    std::size_t tp = 0, fp = 0;
    std::vector<std::pair<double, bool>> sorted;  // (score, positive), descending
    sorted.reserve(samples.size());
    for (const auto& s : samples) sorted.emplace_back(s.score, s.positive);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t i = 0;
    for (double t : thresholds) {
        while (i < sorted.size() && sorted[i].first >= t) {
            (sorted[i].second ? tp : fp)++;
            ++i;
        }
        roc.points.push_back({t, static_cast<double>(tp) / static_cast<double>(n_pos),
                              static_cast<double>(fp) / static_cast<double>(n_neg)});
    }

    for (std::size_t k = 1; k < roc.points.size(); ++k) {
        const auto& a = roc.points[k - 1];
        const auto& b = roc.points[k];
        roc.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }

    roc.youden_j = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < roc.points.size(); ++k) {
        const double j = roc.points[k].tpr - roc.points[k].fpr;
        if (j > roc.youden_j) {
            roc.youden_j = j;
            roc.best_threshold = roc.points[k].threshold;
        }
    }

    const AccSenSpe at_best = acc_sen_spe(samples, roc.best_threshold);
    roc.acc = at_best.acc;
    roc.sen = at_best.sen;
    roc.spe = at_best.spe;
    return roc;
}

inline std::pair<double, double> youden_best_threshold(const RocAnalysis& roc) {
    return {roc.youden_j, roc.best_threshold};
}

struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::size_t> counts;  // row = actual, col = predicted

    explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}

    std::size_t at(std::size_t actual, std::size_t predicted) const {
        return counts[actual * k + predicted];
    }
    std::size_t& at(std::size_t actual, std::size_t predicted) {
        return counts[actual * k + predicted];
    }
    std::size_t total() const {
        std::size_t t = 0;
        for (std::size_t c : counts) t += c;
        return t;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<std::size_t>& predictions,
                                        const std::vector<std::size_t>& actuals,
                                        std::size_t k) {
    if (predictions.size() != actuals.size()) {
        throw DataError("confusion_matrix: prediction/actual length mismatch");
    }
    ConfusionMatrix cm(k);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] >= k || actuals[i] >= k) {
            throw DataError("confusion_matrix: class index out of range at sample " +
                            std::to_string(i));
        }
        ++cm.at(actuals[i], predictions[i]);
    }
    return cm;
}

struct NormalizedConfusion {
    std::size_t k = 0;
    std::vector<double> values;      // rows sum to 1 unless the row was empty
    std::vector<bool> empty_rows;    // flagged all-zero rows, left all-zero

    double at(std::size_t actual, std::size_t predicted) const {
        return values[actual * k + predicted];
    }
};

inline NormalizedConfusion normalize_confusion(const ConfusionMatrix& cm) {
    NormalizedConfusion out;
    out.k = cm.k;
    out.values.assign(cm.k * cm.k, 0.0);
    out.empty_rows.assign(cm.k, false);
    for (std::size_t r = 0; r < cm.k; ++r) {
        std::size_t row_sum = 0;
        for (std::size_t c = 0; c < cm.k; ++c) row_sum += cm.at(r, c);
        if (row_sum == 0) {
            out.empty_rows[r] = true;
            continue;
        }
        for (std::size_t c = 0; c < cm.k; ++c)
            out.values[r * cm.k + c] =
                static_cast<double>(cm.at(r, c)) / static_cast<double>(row_sum);
    }
    return out;
}

// ---- CSV interchange ----

// One "score,label" pair per line; label is 1/positive or 0/negative.
inline std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("read_scores_csv: cannot open " + path.string());
    std::vector<ScoredSample> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.rfind("score", 0) == 0) continue;
        std::istringstream ls(line);
        std::string score_str, label_str;
        if (!std::getline(ls, score_str, ',') || !std::getline(ls, label_str)) {
            throw FormatError("read_scores_csv: bad line '" + line + "'");
        }
        ScoredSample s;
        s.score = std::stod(score_str);
        s.positive = label_str == "1" || label_str == "positive";
        samples.push_back(s);
    }
    return samples;
}

inline void write_roc_csv(const RocAnalysis& roc, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_roc_csv: cannot open " + path.string());
    out << "threshold,tpr,fpr\n";
    char buf[128];
    for (const auto& p : roc.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.tpr, p.fpr);
        out << buf;
    }
}

inline void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_confusion_csv: cannot open " + path.string());
    for (std::size_t r = 0; r < cm.k; ++r) {
        for (std::size_t c = 0; c < cm.k; ++c) out << (c ? "," : "") << cm.at(r, c);
        out << "\n";
    }
}

inline void write_confusion_norm_csv(const NormalizedConfusion& nc,
                                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_confusion_norm_csv: cannot open " + path.string());
    char buf[64];
    for (std::size_t r = 0; r < nc.k; ++r) {
        for (std::size_t c = 0; c < nc.k; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", nc.at(r, c));
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace tilepath
