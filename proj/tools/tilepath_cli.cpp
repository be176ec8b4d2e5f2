// tilepath command line: synthetic corpora, training, evaluation and the
// two-stage tile diagnosis. Exit codes: 0 success, 2 configuration/usage,
// 3 I/O, 4 validation failure.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tilepath/affine.hpp"
#include "tilepath/datagen.hpp"
#include "tilepath/eval.hpp"
#include "tilepath/gradcheck_suite.hpp"
#include "tilepath/pipeline.hpp"
#include "tilepath/train.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace tilepath;

namespace {

void write_json(const ordered_json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string());
    out << j.dump(2) << "\n";
}

fs::path prepare_out_dir(const std::string& out) {
    fs::path dir(out);
    fs::create_directories(dir);
    return dir;
}

Image read_image_or_io_error(const std::string& path) {
    if (!fs::exists(path)) throw IoError("image not found: " + path);
    return read_pnm(path);
}

// evaluation rows in the Table-4 shape, one per class-as-positive orientation
ordered_json binary_eval_rows(const std::vector<double>& p_class0,
                              const std::vector<std::size_t>& labels) {
    ordered_json rows = ordered_json::array();
    for (std::size_t positive_class = 0; positive_class < 2; ++positive_class) {
        std::vector<ScoredSample> samples(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            samples[i].score = positive_class == 0 ? p_class0[i] : 1.0 - p_class0[i];
            samples[i].positive = labels[i] == positive_class;
        }
        const RocAnalysis roc = roc_curve(samples);
        rows.push_back({{"positive_class", positive_class},
                        {"auc", roc.auc},
                        {"youden_j", roc.youden_j},
                        {"best_threshold", roc.best_threshold},
                        {"acc", roc.acc},
                        {"sen", roc.sen},
                        {"spe", roc.spe}});
    }
    return rows;
}

struct SynthArgs {
    std::size_t classes = 2;
    std::size_t per_class = 200;
    std::uint64_t seed = 0;
    std::string out;
};

int run_synth(const SynthArgs& a) {
    const SynthSpec spec = default_spec(a.classes, a.per_class, a.seed);
    const auto patches = synthesize(spec);
    const fs::path dir = prepare_out_dir(a.out);
    for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
        // c<index>_ prefix keeps lexicographic ingest order equal to class index
        fs::create_directories(dir / ("c" + std::to_string(cls) + "_" + spec.classes[cls].name));
    }
    char name[32];
    std::vector<std::size_t> written(spec.classes.size(), 0);
    for (const auto& p : patches) {
        std::snprintf(name, sizeof(name), "%04zu.ppm", written[p.label]++);
        write_ppm(p.image,
                  dir / ("c" + std::to_string(p.label) + "_" + spec.classes[p.label].name) / name);
    }
    write_json({{"command", "synth"},
                {"classes", a.classes},
                {"per_class", a.per_class},
                {"seed", a.seed},
                {"out", a.out}},
               dir / "config_echo.json");
    std::cout << "wrote " << patches.size() << " patches to " << a.out << "\n";
    return 0;
}

struct TrainArgs {
    std::string arch = "tiny_cnn";
    std::string data;
    std::string extractor;
    std::size_t epochs = 20;
    double lr = 0.01;
    std::size_t batch = 32;
    double momentum = 0.0;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    std::string out;
};

std::vector<Sample> corpus_to_samples(const Corpus& corpus, const Model* extractor) {
    std::vector<Sample> samples;
    samples.reserve(corpus.patches.size());
    for (const auto& p : corpus.patches) {
        Sample s;
        s.input = extractor ? extract_features(*extractor, p.image) : p.image.to_tensor();
        s.label = p.label;
        samples.push_back(std::move(s));
    }
    return samples;
}

int run_train(const TrainArgs& a) {
    const bool is_head = a.arch.rfind("classifier_head", 0) == 0;
    if (is_head && a.extractor.empty()) {
        throw ConfigError("training a classifier head needs --extractor weights");
    }
    Model model = build_architecture(a.arch);
    Rng init_rng = Rng(a.seed).child(100);
    init_weights(model, init_rng);

    Model extractor;
    if (is_head) extractor = load_weights(a.extractor);
    const Corpus corpus = ingest(a.data, a.train_fraction, a.seed);
    const auto samples = corpus_to_samples(corpus, is_head ? &extractor : nullptr);

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = a.lr;
    cfg.use_momentum = a.momentum > 0.0;
    cfg.momentum = a.momentum > 0.0 ? a.momentum : 0.9;
    cfg.seed = a.seed;
    cfg.train_fraction = a.train_fraction;
    const TrainLog log = train(model, samples, cfg);

    const fs::path dir = prepare_out_dir(a.out);
    save_weights(model, dir / "model.tpwf");
    write_train_log_csv(log, dir / "train_log.csv");
    write_json({{"command", "train"},
                {"arch", a.arch},
                {"data", a.data},
                {"extractor", a.extractor},
                {"epochs", a.epochs},
                {"lr", a.lr},
                {"batch", a.batch},
                {"momentum", a.momentum},
                {"seed", a.seed},
                {"train_fraction", a.train_fraction},
                {"out", a.out}},
               dir / "config_echo.json");
    if (!log.epochs.empty()) {
        std::cout << "final val_acc " << log.epochs.back().val_acc << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string model;
    std::string extractor;
    std::string data;
    std::string scores;
    int positive_class = 0;
    std::uint64_t seed = 0;
    double train_fraction = 0.7;
    std::string out;
};

int run_eval(const EvalArgs& a) {
    const fs::path dir = prepare_out_dir(a.out);
    ordered_json report;
    report["command"] = "eval";

    if (!a.scores.empty()) {
        const auto samples = read_scores_csv(a.scores);
        std::vector<double> p0(samples.size());
        std::vector<std::size_t> labels(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            p0[i] = samples[i].score;
            labels[i] = samples[i].positive ? 0 : 1;
        }
        report["rows"] = binary_eval_rows(p0, labels);
        std::vector<ScoredSample> oriented = samples;
        if (a.positive_class == 1) {
            for (auto& s : oriented) {
                s.score = 1.0 - s.score;
                s.positive = !s.positive;
            }
        }
        write_roc_csv(roc_curve(oriented), dir / "roc.csv");
    } else {
        if (a.model.empty() || a.data.empty()) {
            throw ConfigError("eval needs either --scores or both --model and --data");
        }
        Model model = load_weights(a.model);
        Model extractor;
        const bool is_head = model.name.rfind("classifier_head", 0) == 0;
        if (is_head) {
            if (a.extractor.empty()) {
                throw ConfigError("evaluating a classifier head needs --extractor weights");
            }
            extractor = load_weights(a.extractor);
        }
        const Corpus corpus = ingest(a.data, a.train_fraction, a.seed);
        const std::size_t n_classes = model.output_shape().back();

        // validation-split predictions
        std::vector<std::size_t> predictions, actuals;
        std::vector<double> p0;
        for (std::size_t idx : corpus.manifest.val_indices) {
            const auto& patch = corpus.patches[idx];
            const Tensor input =
                is_head ? extract_features(extractor, patch.image) : patch.image.to_tensor();
            const Tensor probs = forward(model, input, Mode::Infer);
            predictions.push_back(argmax(probs));
            actuals.push_back(patch.label);
            p0.push_back(probs[0]);
        }
        const ConfusionMatrix cm = confusion_matrix(predictions, actuals, n_classes);
        write_confusion_csv(cm, dir / "confusion.csv");
        write_confusion_norm_csv(normalize_confusion(cm), dir / "confusion_norm.csv");
        report["classes"] = n_classes;
        report["val_samples"] = actuals.size();
        if (n_classes == 2) {
            report["rows"] = binary_eval_rows(p0, actuals);
            std::vector<ScoredSample> samples(actuals.size());
            for (std::size_t i = 0; i < actuals.size(); ++i) {
                samples[i].score = a.positive_class == 0 ? p0[i] : 1.0 - p0[i];
                samples[i].positive =
                    actuals[i] == static_cast<std::size_t>(a.positive_class);
            }
            write_roc_csv(roc_curve(samples), dir / "roc.csv");
        }
    }
    write_json(report, dir / "report.json");
    write_json({{"command", "eval"},
                {"model", a.model},
                {"extractor", a.extractor},
                {"data", a.data},
                {"scores", a.scores},
                {"positive_class", a.positive_class},
                {"seed", a.seed},
                {"train_fraction", a.train_fraction},
                {"out", a.out}},
               dir / "config_echo.json");
    return 0;
}

struct DetectArgs {
    std::string image;
    std::string extractor;
    std::string head2;
    double threshold = 0.5;
    std::size_t window = 50;
    std::size_t stride = 0;
    std::string out;
};

int run_detect(const DetectArgs& a) {
    const Image img = read_image_or_io_error(a.image);
    Model extractor, head2 = load_weights(a.head2);
    const bool use_extractor = head2.name.rfind("classifier_head", 0) == 0;
    if (use_extractor) {
        if (a.extractor.empty()) throw ConfigError("detect with a head model needs --extractor");
        extractor = load_weights(a.extractor);
    }
    const SkinMask mask =
        detect_skin(img, use_extractor ? &extractor : nullptr, head2, a.threshold,
                    a.window, a.stride);
    const fs::path dir = prepare_out_dir(a.out);
    write_ppm(render_mask(img, mask), dir / "mask.ppm");
    std::ofstream tiles(dir / "tiles.csv");
    tiles << "row,col,skin\n";
    for (std::size_t i = 0; i < mask.grid.tiles.size(); ++i) {
        tiles << mask.grid.tiles[i].row << "," << mask.grid.tiles[i].col << ","
              << (mask.skin[i] ? 1 : 0) << "\n";
    }
    write_json({{"command", "detect"},
                {"image", a.image},
                {"extractor", a.extractor},
                {"head2", a.head2},
                {"threshold", a.threshold},
                {"window", a.window},
                {"stride", a.stride == 0 ? a.window : a.stride},
                {"out", a.out}},
               dir / "config_echo.json");
    return 0;
}

struct DiagnoseArgs {
    std::string image;
    std::string extractor;
    std::string head2;
    std::string head7;
    double threshold = 0.5;
    std::string out;
};

int run_diagnose(const DiagnoseArgs& a) {
    const Image img = read_image_or_io_error(a.image);
    Model head2 = load_weights(a.head2);
    Model head7 = load_weights(a.head7);
    Model extractor;
    const bool use_extractor = head2.name.rfind("classifier_head", 0) == 0 ||
                               head7.name.rfind("classifier_head", 0) == 0;
    if (use_extractor) {
        if (a.extractor.empty()) throw ConfigError("diagnose with head models needs --extractor");
        extractor = load_weights(a.extractor);
    }
    const auto [report, mask] =
        diagnose(img, use_extractor ? &extractor : nullptr, head2, head7, a.threshold);
    const fs::path dir = prepare_out_dir(a.out);
    write_json(report_to_json(report, mask), dir / "report.json");
    write_histogram_csv(report, dir / "histogram.csv");
    write_ppm(render_mask(img, mask), dir / "mask.ppm");
    write_json({{"command", "diagnose"},
                {"image", a.image},
                {"extractor", a.extractor},
                {"head2", a.head2},
                {"head7", a.head7},
                {"threshold", a.threshold},
                {"out", a.out}},
               dir / "config_echo.json");
    return 0;
}

struct GradcheckArgs {
    std::string arch = "tiny_cnn";
    std::uint64_t seed = 0;
    double corrupt = 0.0;  // test hook: perturbs one analytic gradient
};

int run_gradcheck(const GradcheckArgs& a) {
    const Model model = build_architecture(a.arch);
    const auto results = gradcheck_model(model, a.seed, 1e-5, 64, 1e-4, a.corrupt);
    bool all_pass = true;
    std::printf("%-24s %-10s %-8s %-12s %s\n", "layer", "kind", "target", "max_rel_err",
                "status");
    for (const auto& r : results) {
        std::printf("%-24s %-10s %-8s %-12.3e %s\n", r.layer.c_str(), r.kind.c_str(),
                    r.target.c_str(), r.max_rel_err, r.pass ? "pass" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) throw ValidationError("gradient check failed");
    return 0;
}

struct AugmentArgs {
    std::string in;
    std::size_t count = 1;
    double theta = 0.0, tx = 0.0, ty = 0.0, shear = 0.0;
    double zoom_min = 1.0, zoom_max = 1.0;
    bool flip = false;
    std::string interp = "nearest";
    double fill = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int run_augment(const AugmentArgs& a) {
    const Image img = read_image_or_io_error(a.in);
    AugmentConfig cfg;
    cfg.theta_range = a.theta;
    cfg.tx_range = a.tx;
    cfg.ty_range = a.ty;
    cfg.shear_range = a.shear;
    cfg.zoom_min = a.zoom_min;
    cfg.zoom_max = a.zoom_max;
    cfg.horizontal_flip = a.flip;
    cfg.image_height = img.height;
    cfg.image_width = img.width;
    const Interpolation interp =
        a.interp == "bilinear" ? Interpolation::Bilinear : Interpolation::Nearest;

    const fs::path dir = prepare_out_dir(a.out);
    Rng rng(a.seed);
    ordered_json log = ordered_json::array();
    char name[32];
    for (std::size_t i = 0; i < a.count; ++i) {
        const SampledAugmentation s = sample_augmentation(cfg, rng);
        Image result = apply_affine(img, s.matrix, interp, a.fill);
        if (s.flip) result = horizontal_flip(result);
        std::snprintf(name, sizeof(name), "aug_%03zu.ppm", i);
        write_ppm(result, dir / name);
        log.push_back({{"file", name},
                       {"matrix", s.matrix.m},
                       {"flip", s.flip},
                       {"interpolation", a.interp},
                       {"fill", a.fill},
                       {"theta", s.theta},
                       {"tx", s.tx},
                       {"ty", s.ty},
                       {"shear", s.shear},
                       {"zx", s.zx},
                       {"zy", s.zy}});
    }
    write_json(log, dir / "transforms.json");
    write_json({{"command", "augment"},
                {"in", a.in},
                {"count", a.count},
                {"theta", a.theta},
                {"tx", a.tx},
                {"ty", a.ty},
                {"shear", a.shear},
                {"zoom_min", a.zoom_min},
                {"zoom_max", a.zoom_max},
                {"flip", a.flip},
                {"interp", a.interp},
                {"fill", a.fill},
                {"seed", a.seed},
                {"out", a.out}},
               dir / "config_echo.json");
    return 0;
}

struct InitArgs {
    std::string arch = "vgg16_headless";
    std::uint64_t seed = 0;
    std::string out;
};

int run_init(const InitArgs& a) {
    Model model = build_architecture(a.arch);
    Rng rng(a.seed);
    init_weights(model, rng);
    const fs::path dir = prepare_out_dir(a.out);
    save_weights(model, dir / "model.tpwf");
    write_json({{"command", "init"}, {"arch", a.arch}, {"seed", a.seed}, {"out", a.out}},
               dir / "config_echo.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tilepath: tile-based skin/acne image classification pipeline"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    synth->add_option("--classes", synth_args.classes, "2 or 7")->default_val(2);
    synth->add_option("--per-class", synth_args.per_class)->default_val(200);
    synth->add_option("--seed", synth_args.seed)->default_val(0);
    synth->add_option("--out", synth_args.out)->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "train a model on a corpus");
    train_cmd->add_option("--arch", train_args.arch,
                          "tiny_cnn | classifier_head_2 | classifier_head_7");
    train_cmd->add_option("--data", train_args.data)->required();
    train_cmd->add_option("--extractor", train_args.extractor,
                          "extractor weights (required for head architectures)");
    train_cmd->add_option("--epochs", train_args.epochs)->default_val(20);
    train_cmd->add_option("--lr", train_args.lr)->default_val(0.01);
    train_cmd->add_option("--batch", train_args.batch)->default_val(32);
    train_cmd->add_option("--momentum", train_args.momentum)->default_val(0.0);
    train_cmd->add_option("--seed", train_args.seed)->default_val(0);
    train_cmd->add_option("--train-fraction", train_args.train_fraction)->default_val(0.7);
    train_cmd->add_option("--out", train_args.out)->required();

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model or a score CSV");
    eval_cmd->add_option("--model", eval_args.model);
    eval_cmd->add_option("--extractor", eval_args.extractor);
    eval_cmd->add_option("--data", eval_args.data);
    eval_cmd->add_option("--scores", eval_args.scores, "score,label CSV instead of a model");
    eval_cmd->add_option("--positive-class", eval_args.positive_class)->default_val(0);
    eval_cmd->add_option("--seed", eval_args.seed)->default_val(0);
    eval_cmd->add_option("--train-fraction", eval_args.train_fraction)->default_val(0.7);
    eval_cmd->add_option("--out", eval_args.out)->required();

    DetectArgs detect_args;
    auto* detect = app.add_subcommand("detect", "skin mask for one image");
    detect->add_option("--image", detect_args.image)->required();
    detect->add_option("--extractor", detect_args.extractor);
    detect->add_option("--head2", detect_args.head2)->required();
    detect->add_option("--threshold", detect_args.threshold)->default_val(0.5);
    detect->add_option("--window", detect_args.window)->default_val(50);
    detect->add_option("--stride", detect_args.stride, "0 = same as window")->default_val(0);
    detect->add_option("--out", detect_args.out)->required();

    DiagnoseArgs diagnose_args;
    auto* diag = app.add_subcommand("diagnose", "two-stage diagnosis report for one image");
    diag->add_option("--image", diagnose_args.image)->required();
    diag->add_option("--extractor", diagnose_args.extractor);
    diag->add_option("--head2", diagnose_args.head2)->required();
    diag->add_option("--head7", diagnose_args.head7)->required();
    diag->add_option("--threshold", diagnose_args.threshold)->default_val(0.5);
    diag->add_option("--out", diagnose_args.out)->required();

    GradcheckArgs gradcheck_args;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer");
    gc->add_option("--arch", gradcheck_args.arch);
    gc->add_option("--seed", gradcheck_args.seed)->default_val(0);
    gc->add_option("--corrupt", gradcheck_args.corrupt)->group("");  // test hook, hidden

    AugmentArgs augment_args;
    auto* aug = app.add_subcommand("augment", "random affine augmentations of one image");
    aug->add_option("--in", augment_args.in)->required();
    aug->add_option("--count", augment_args.count)->default_val(1);
    aug->add_option("--theta", augment_args.theta, "rotation range, degrees");
    aug->add_option("--tx", augment_args.tx, "row shift range, pixels");
    aug->add_option("--ty", augment_args.ty, "column shift range, pixels");
    aug->add_option("--shear", augment_args.shear, "shear range, degrees");
    aug->add_option("--zoom-min", augment_args.zoom_min)->default_val(1.0);
    aug->add_option("--zoom-max", augment_args.zoom_max)->default_val(1.0);
    aug->add_flag("--flip", augment_args.flip, "enable random horizontal flip");
    aug->add_option("--interp", augment_args.interp)->check(CLI::IsMember({"nearest", "bilinear"}));
    aug->add_option("--fill", augment_args.fill)->default_val(0.0);
    aug->add_option("--seed", augment_args.seed)->default_val(0);
    aug->add_option("--out", augment_args.out)->required();

    InitArgs init_args;
    auto* init_cmd = app.add_subcommand("init", "write seeded initial weights for an architecture");
    init_cmd->add_option("--arch", init_args.arch);
    init_cmd->add_option("--seed", init_args.seed)->default_val(0);
    init_cmd->add_option("--out", init_args.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return run_synth(synth_args);
        if (*train_cmd) return run_train(train_args);
        if (*eval_cmd) return run_eval(eval_args);
        if (*detect) return run_detect(detect_args);
        if (*diag) return run_diagnose(diagnose_args);
        if (*gc) return run_gradcheck(gradcheck_args);
        if (*aug) return run_augment(augment_args);
        if (*init_cmd) return run_init(init_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "validation failure: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
