// End-to-end acceptance checks. Prints one pass/fail line per criterion and
// exits with the number of failures. Several criteria train real models, so
// a full run takes on the order of ten minutes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "tilepath/affine.hpp"
#include "tilepath/datagen.hpp"
#include "tilepath/eval.hpp"
#include "tilepath/gradcheck_suite.hpp"
#include "tilepath/pipeline.hpp"
#include "tilepath/train.hpp"

#include "json.hpp"

using namespace tilepath;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

fs::path scratch() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "tilepath_acceptance";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

// ---------- criterion 1: analytic gradients match finite differences ----------

Outcome check_gradients() {
    const double start = now_seconds();
    double worst = 0.0;
    bool all_pass = true;
    for (const char* arch : {"tiny_cnn", "classifier_head_2", "classifier_head_7"}) {
        const auto results = gradcheck_model(build_architecture(arch), 17, 1e-5, 64, 1e-4);
        for (const auto& r : results) {
            worst = std::max(worst, r.max_rel_err);
            all_pass = all_pass && r.pass;
        }
    }
    const double elapsed = now_seconds() - start;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max rel err %.3e over all layers, %.1fs", worst, elapsed);
    return {all_pass && worst < 1e-4 && elapsed < 120.0, buf};
}

// ---------- criterion 2: architecture output shapes ----------

Outcome check_shapes() {
    const auto vgg = build_architecture("vgg16_headless").output_shape();
    const auto tiny = build_architecture("tiny_cnn").output_shape();
    const auto h2 = build_architecture("classifier_head_2").output_shape();
    const auto h7 = build_architecture("classifier_head_7").output_shape();

    // flatten width inside tiny_cnn: 13x13x64 after two ceil-rounded pools
    const Model tiny_model = build_architecture("tiny_cnn");
    std::vector<std::size_t> shape = tiny_model.input_shape;
    std::size_t flat = 0;
    for (const auto& l : tiny_model.layers) {
        shape = l.output_shape(shape);
        if (l.kind == LayerKind::Flatten && flat == 0) flat = shape[0];
    }

    const bool pass = vgg == std::vector<std::size_t>{1, 1, 512} &&
                      tiny == std::vector<std::size_t>{2} && flat == 10816 &&
                      h2 == std::vector<std::size_t>{2} && h7 == std::vector<std::size_t>{7};
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "extractor 1x1x512:%d small-net flatten %zu out %zu heads %zu/%zu",
                  vgg == std::vector<std::size_t>{1, 1, 512} ? 1 : 0, flat, tiny.back(),
                  h2.back(), h7.back());
    return {pass, buf};
}

// ---------- criterion 3: warping against a brute-force oracle ----------

// Independent 3x3 inverse via Gauss-Jordan elimination.
std::array<double, 9> invert3(const std::array<double, 9>& m) {
    double a[3][6] = {};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) a[r][c] = m[static_cast<std::size_t>(r * 3 + c)];
        a[r][3 + r] = 1.0;
    }
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        for (int c = 0; c < 6; ++c) std::swap(a[col][c], a[pivot][c]);
        const double d = a[col][col];
        for (int c = 0; c < 6; ++c) a[col][c] /= d;
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (int c = 0; c < 6; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, 9> inv;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) inv[static_cast<std::size_t>(r * 3 + c)] = a[r][3 + c];
    return inv;
}

Image oracle_warp(const Image& img, const std::array<double, 9>& m, double fill) {
    const auto inv = invert3(m);
    Image out(img.height, img.width, img.channels);
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            const double pr = static_cast<double>(r + 1);
            const double pc = static_cast<double>(c + 1);
            const double sr = std::round(inv[0] * pr + inv[1] * pc + inv[2]);
            const double sc = std::round(inv[3] * pr + inv[4] * pc + inv[5]);
            const bool inside = sr >= 1.0 && sr <= static_cast<double>(img.height) &&
                                sc >= 1.0 && sc <= static_cast<double>(img.width);
            for (std::size_t ch = 0; ch < img.channels; ++ch) {
                out.at(r, c, ch) = inside ? img.at(static_cast<std::size_t>(sr) - 1,
                                                   static_cast<std::size_t>(sc) - 1, ch)
                                          : fill;
            }
        }
    }
    return out;
}

Outcome check_affine() {
    Rng rng(31);
    Image img(8, 8, 3);
    for (double& p : img.pixels) p = rng.uniform();

    const Image id = apply_affine(img, AffineMatrix::identity());
    if (id.pixels != img.pixels) return {false, "identity warp is not bit-exact"};

    // values chosen so no source coordinate lands exactly on a .5 rounding
    // boundary, where two correct inverses can disagree by one ulp
    const double thetas[] = {-90.0, -37.0, 0.0, 22.0, 90.0};
    const double shifts[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
    const double zooms[] = {0.8, 0.9, 1.0, 1.3, 1.9};
    std::size_t cases = 0, mismatches = 0;
    for (double theta : thetas) {
        for (double shift : shifts) {
            for (double zoom : zooms) {
                const AffineMatrix m = rotation_matrix(theta, 8, 8) *
                                       zoom_matrix(zoom, zoom, 8, 8) *
                                       shift_matrix(shift, -shift);
                const Image got = apply_affine(img, m, Interpolation::Nearest, 0.25);
                const Image want = oracle_warp(img, m.m, 0.25);
                ++cases;
                if (got.pixels != want.pixels) ++mismatches;
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu/%zu grid cases exact", cases - mismatches, cases);
    return {mismatches == 0, buf};
}

// ---------- criterion 4: ROC area equals the pairwise ranking statistic ----------

double mann_whitney(const std::vector<ScoredSample>& samples) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (const auto& p : samples) {
        if (!p.positive) continue;
        for (const auto& n : samples) {
            if (n.positive) continue;
            ++pairs;
            if (p.score > n.score) wins += 1.0;
            else if (p.score == n.score) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

Outcome check_roc() {
    const RocAnalysis perfect =
        roc_curve({{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}});
    if (perfect.auc != 1.0) return {false, "perfectly separated scores did not give AUC 1"};

    Rng rng(19);
    double worst_auc = 0.0, worst_youden = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(120);
        std::vector<ScoredSample> samples(n);
        for (auto& s : samples) {
            s.score = static_cast<double>(rng.uniform_int(25)) / 24.0;  // forces ties
            s.positive = rng.bernoulli(0.4);
        }
        samples[0].positive = true;
        samples[n - 1].positive = false;
        const RocAnalysis roc = roc_curve(samples);
        worst_auc = std::max(worst_auc, std::fabs(roc.auc - mann_whitney(samples)));
        const AccSenSpe at = acc_sen_spe(samples, roc.best_threshold);
        worst_youden =
            std::max(worst_youden, std::fabs(roc.youden_j - (at.sen + at.spe - 1.0)));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |AUC-MW| %.2e, max Youden gap %.2e", worst_auc,
                  worst_youden);
    return {worst_auc < 1e-12 && worst_youden < 1e-12, buf};
}

// ---------- criterion 5: binary training end to end, reproducibly ----------

std::vector<Sample> to_samples(const std::vector<LabeledPatch>& patches) {
    std::vector<Sample> samples;
    samples.reserve(patches.size());
    for (const auto& p : patches) samples.push_back({p.image.to_tensor(), p.label});
    return samples;
}

std::string log_fingerprint(const TrainLog& log) {
    char buf[256];
    std::string fp;
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%zu:%.17g:%.17g:%.17g:%.17g;", e.epoch,
                      e.train_loss, e.train_acc, e.val_loss, e.val_acc);
        fp += buf;
    }
    return fp;
}

Outcome check_binary_training() {
    const auto samples = to_samples(synthesize(default_spec(2, 200, 123)));

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 32;
    cfg.seed = 123;

    Model model = build_architecture("tiny_cnn");
    Rng init_rng = Rng(cfg.seed).child(100);
    init_weights(model, init_rng);
    const TrainLog log = train(model, samples, cfg);
    const double val_acc = log.epochs.back().val_acc;

    std::vector<ScoredSample> scored;
    for (std::size_t i : log.val_indices) {
        const Tensor probs = forward(model, samples[i].input, Mode::Infer);
        scored.push_back({probs[0], samples[i].label == 0});
    }
    const double auc = roc_curve(scored).auc;

    // bitwise reproducibility, demonstrated on two short runs
    TrainConfig short_cfg = cfg;
    short_cfg.epochs = 2;
    std::string fp[2];
    double probe[2];
    for (int run = 0; run < 2; ++run) {
        Model m2 = build_architecture("tiny_cnn");
        Rng r2 = Rng(short_cfg.seed).child(100);
        init_weights(m2, r2);
        fp[run] = log_fingerprint(train(m2, samples, short_cfg));
        probe[run] = forward(m2, samples[0].input, Mode::Infer)[0];
    }
    const bool reproducible = fp[0] == fp[1] && probe[0] == probe[1];

    char buf[128];
    std::snprintf(buf, sizeof(buf), "val acc %.3f, val AUC %.4f, reruns identical: %s",
                  val_acc, auc, reproducible ? "yes" : "NO");
    return {val_acc >= 0.95 && auc >= 0.98 && reproducible, buf};
}

// ---------- criteria 6 and 7 share the extractor and trained heads ----------

struct TrainedHeads {
    Model extractor;  // fixed random weights
    Model head2;
    Model head7;
    double head7_val_acc = 0.0;
    double head7_min_diag = 1.0;
};

TrainedHeads& heads() {
    static TrainedHeads t = [] {
        TrainedHeads out;
        out.extractor = build_architecture("vgg16_headless");
        Rng vgg_rng = Rng(7).child(100);
        init_weights(out.extractor, vgg_rng);

        const auto featurize = [&](const std::vector<LabeledPatch>& patches) {
            std::vector<Sample> samples;
            samples.reserve(patches.size());
            for (const auto& p : patches)
                samples.push_back({extract_features(out.extractor, p.image), p.label});
            return samples;
        };

        TrainConfig cfg;
        cfg.epochs = 300;  // head training on cached features is cheap
        cfg.learning_rate = 0.003;
        cfg.use_momentum = true;
        cfg.momentum = 0.9;
        cfg.batch_size = 32;
        cfg.seed = 7;

        const auto samples7 = featurize(synthesize(default_spec(7, 200, 77)));
        out.head7 = build_architecture("classifier_head_7");
        Rng h7_rng = Rng(7).child(101);
        init_weights(out.head7, h7_rng);
        const TrainLog log7 = train(out.head7, samples7, cfg);
        out.head7_val_acc = log7.epochs.back().val_acc;

        std::vector<std::size_t> pred, actual;
        for (std::size_t i : log7.val_indices) {
            pred.push_back(argmax(forward(out.head7, samples7[i].input, Mode::Infer)));
            actual.push_back(samples7[i].label);
        }
        const NormalizedConfusion nc = normalize_confusion(confusion_matrix(pred, actual, 7));
        for (std::size_t c = 0; c < 7; ++c)
            out.head7_min_diag = std::min(out.head7_min_diag, nc.at(c, c));

        const auto samples2 = featurize(synthesize(default_spec(2, 200, 78)));
        out.head2 = build_architecture("classifier_head_2");
        Rng h2_rng = Rng(7).child(102);
        init_weights(out.head2, h2_rng);
        train(out.head2, samples2, cfg);
        return out;
    }();
    return t;
}

Outcome check_seven_class() {
    const TrainedHeads& t = heads();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "val acc %.3f, min per-class recall %.2f",
                  t.head7_val_acc, t.head7_min_diag);
    return {t.head7_val_acc >= 0.85 && t.head7_min_diag >= 0.7, buf};
}

Outcome check_scene_diagnosis() {
    const TrainedHeads& t = heads();
    std::vector<std::vector<int>> layout(10, std::vector<int>(10, -1));
    for (std::size_t r = 0; r < 7; ++r)  // 70 skin tiles, rows 7-9 background
        for (std::size_t c = 0; c < 10; ++c)
            layout[r][c] = static_cast<int>((r * 10 + c) % 7);

    const auto [scene, truth] = compose_scene(default_spec(7, 1, 0), layout, 5);
    const auto [report, mask] = diagnose(scene, &t.extractor, t.head2, t.head7, 0.5);

    std::size_t correct_gate = 0;
    for (std::size_t i = 0; i < mask.grid.tiles.size(); ++i) {
        const std::size_t tr = mask.grid.tiles[i].row / 50;
        const std::size_t tc = mask.grid.tiles[i].col / 50;
        const bool truly_skin = truth.layout[tr][tc] >= 0;
        if (mask.skin[i] == truly_skin) ++correct_gate;
    }
    const double gate_acc =
        static_cast<double>(correct_gate) / static_cast<double>(mask.grid.tiles.size());

    double linf = 0.0, sum = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
        linf = std::max(linf, std::fabs(report.proportions[c] - truth.proportions[c]));
        sum += report.proportions[c];
    }

    const bool pass = mask.grid.tiles.size() == 100 && gate_acc >= 0.95 && linf <= 0.1 &&
                      std::fabs(sum - 1.0) <= 1e-9 && !report.empty_report;
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "%zu tiles, gate acc %.2f, proportion Linf %.3f, sum err %.1e",
                  mask.grid.tiles.size(), gate_acc, linf, std::fabs(sum - 1.0));
    return {pass, buf};
}

// ---------- criterion 8: artifact round trips ----------

Outcome check_round_trips() {
    Rng rng(41);
    std::vector<std::string> problems;

    // weights: reload must preserve the forward pass and the file bytes
    {
        Model m = build_architecture("classifier_head_7");
        init_weights(m, rng);
        const fs::path p1 = scratch() / "rt1.tpwf";
        const fs::path p2 = scratch() / "rt2.tpwf";
        save_weights(m, p1);
        const Model loaded = load_weights(p1);
        save_weights(loaded, p2);
        Tensor probe({512, 1, 1});
        for (std::size_t i = 0; i < probe.numel(); ++i) probe[i] = rng.uniform();
        const Tensor a = forward(load_weights(p1), probe, Mode::Infer);
        const Tensor b = forward(load_weights(p2), probe, Mode::Infer);
        if (a.data() != b.data()) problems.push_back("weights forward drifted");
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), {});
        const std::string b2((std::istreambuf_iterator<char>(f2)), {});
        if (b1 != b2) problems.push_back("weight file bytes not idempotent");
    }

    // images: write/read/write must be byte-stable and within quantization
    {
        Image img(23, 31, 3);
        for (double& p : img.pixels) p = rng.uniform();
        const fs::path p1 = scratch() / "rt.ppm";
        const fs::path p2 = scratch() / "rt_again.ppm";
        write_ppm(img, p1);
        const Image back = read_pnm(p1);
        write_ppm(back, p2);
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            if (std::fabs(img.pixels[i] - back.pixels[i]) > 0.5 / 255.0 + 1e-12) {
                problems.push_back("ppm quantization error too large");
                break;
            }
        }
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), {});
        const std::string b2((std::istreambuf_iterator<char>(f2)), {});
        if (b1 != b2) problems.push_back("ppm bytes not idempotent");
    }

    // transform log: the recorded matrix re-creates the augmented image
    {
        Image img(50, 50, 3);
        for (double& p : img.pixels) p = rng.uniform();
        AugmentConfig cfg;
        cfg.theta_range = 20.0;
        cfg.tx_range = 4.0;
        cfg.ty_range = 4.0;
        cfg.shear_range = 8.0;
        cfg.zoom_min = 0.8;
        cfg.zoom_max = 1.2;
        cfg.horizontal_flip = true;
        for (int i = 0; i < 10; ++i) {
            const SampledAugmentation s = sample_augmentation(cfg, rng);
            Image once = apply_affine(img, s.matrix);
            if (s.flip) once = horizontal_flip(once);
            AffineMatrix replay;
            replay.m = s.matrix.m;  // as if parsed back from the log
            Image again = apply_affine(img, replay);
            if (s.flip) again = horizontal_flip(again);
            if (once.pixels != again.pixels) {
                problems.push_back("transform replay diverged");
                break;
            }
        }
    }

    std::string detail = "weights, images and transform logs replay exactly";
    if (!problems.empty()) {
        detail.clear();
        for (const auto& p : problems) detail += (detail.empty() ? "" : "; ") + p;
    }
    return {problems.empty(), detail};
}

// ---------- criterion 9: evaluation report carries the full metric row ----------

Outcome check_eval_report() {
    const char* cli = std::getenv("TILEPATH_CLI_PATH");
#ifdef TILEPATH_CLI_PATH
    if (!cli) cli = TILEPATH_CLI_PATH;  // baked in at build time
#endif
    if (!cli) return {false, "TILEPATH_CLI_PATH is not set"};

    const fs::path scores = scratch() / "scores.csv";
    std::ofstream(scores) << "score,label\n"
                          << "0.95,1\n0.9,1\n0.85,1\n0.7,0\n0.62,1\n0.4,0\n0.35,0\n0.1,0\n";
    const fs::path out = scratch() / "eval_out";
    const std::string cmd = std::string(cli) + " eval --scores " + scores.string() +
                            " --out " + out.string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        return {false, "eval command failed"};
    }

    std::ifstream in(out / "report.json");
    if (!in) return {false, "report.json missing"};
    const auto report = nlohmann::json::parse(in);
    if (!report.contains("rows") || report["rows"].size() != 2) {
        return {false, "expected one metric row per positive-class orientation"};
    }
    std::size_t present = 0;
    for (const auto& row : report["rows"]) {
        for (const char* key : {"auc", "youden_j", "best_threshold", "acc", "sen", "spe"}) {
            if (row.contains(key) && row[key].is_number()) ++present;
        }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu/12 metric fields present", present);
    return {present == 12, buf};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"analytic gradients match finite differences", check_gradients},
        {"architecture output shapes", check_shapes},
        {"affine warping matches the brute-force oracle", check_affine},
        {"ROC area equals the pairwise ranking statistic", check_roc},
        {"binary tile training reaches spec accuracy, reproducibly", check_binary_training},
        {"seven-class head on extractor features", check_seven_class},
        {"composed-scene diagnosis matches ground truth", check_scene_diagnosis},
        {"weight/image/transform-log round trips", check_round_trips},
        {"evaluation report carries auc/youden/threshold/acc/sen/spe", check_eval_report},
    };

    int failures = 0;
    int index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        Outcome outcome;
        try {
            outcome = fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass) ++failures;
        std::printf("criterion %d: %s — %s (%s)\n", index, outcome.pass ? "PASS" : "FAIL",
                    name, outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures;
}
