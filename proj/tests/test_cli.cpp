#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "tilepath/affine.hpp"
#include "tilepath/datagen.hpp"

#include "json.hpp"

using namespace tilepath;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "tilepath_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string cli_path() {
    const char* p = std::getenv("TILEPATH_CLI_PATH");
#ifdef TILEPATH_CLI_PATH
    if (!p) p = TILEPATH_CLI_PATH;  // baked in at build time
#endif
    REQUIRE_MESSAGE(p != nullptr, "TILEPATH_CLI_PATH must point at the cli binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd =
        cli_path() + " " + args + " > " + (work_dir() / "stdout.txt").string() + " 2> " +
        (work_dir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) ++n;
    }
    return n;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

nlohmann::json load_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("synth writes one directory per class with the requested counts") {
    const fs::path out = work_dir() / "synth7";
    REQUIRE(run("synth --classes 7 --per-class 200 --seed 1 --out " + out.string()) == 0);
    std::size_t ppm = 0;
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(out)) {
        if (e.is_directory()) {
            dirs.push_back(e.path().filename().string());
            for (const auto& f : fs::directory_iterator(e.path()))
                if (f.path().extension() == ".ppm") ++ppm;
        }
    }
    CHECK(ppm == 1400);
    CHECK(dirs.size() == 7);
    std::sort(dirs.begin(), dirs.end());
    CHECK(dirs[0] == "c0_papule");
    CHECK(dirs[3] == "c3_normal_skin");
    CHECK(fs::exists(out / "config_echo.json"));
}

TEST_CASE("synth is deterministic in the seed") {
    const fs::path a = work_dir() / "synth_a";
    const fs::path b = work_dir() / "synth_b";
    const fs::path c = work_dir() / "synth_c";
    REQUIRE(run("synth --classes 2 --per-class 3 --seed 5 --out " + a.string()) == 0);
    REQUIRE(run("synth --classes 2 --per-class 3 --seed 5 --out " + b.string()) == 0);
    REQUIRE(run("synth --classes 2 --per-class 3 --seed 6 --out " + c.string()) == 0);
    CHECK(slurp(a / "c0_skin" / "0000.ppm") == slurp(b / "c0_skin" / "0000.ppm"));
    CHECK(slurp(a / "c0_skin" / "0000.ppm") != slurp(c / "c0_skin" / "0000.ppm"));
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run("synth --classes 2") == 2);                       // missing --out
    CHECK(run("nonsense --out x") == 2);                        // unknown subcommand
    CHECK(run("") == 2);                                        // subcommand required
    CHECK(run("augment --in x.ppm --interp cubic --out y") == 2);
}

TEST_CASE("missing input image exits with code 3") {
    const fs::path head = work_dir() / "head_for_io";
    REQUIRE(run("init --arch classifier_head_2 --out " + head.string()) == 0);
    CHECK(run("detect --image " + (work_dir() / "absent.ppm").string() + " --head2 " +
              (head / "model.tpwf").string() + " --out " + (work_dir() / "io_out").string()) == 3);
    CHECK(run("train --data " + (work_dir() / "no_corpus").string() + " --out " +
              (work_dir() / "io_out2").string()) == 3);
}

TEST_CASE("gradcheck passes clean and fails when sabotaged") {
    CHECK(run("gradcheck --arch classifier_head_2 --seed 3") == 0);
    CHECK(run("gradcheck --arch classifier_head_2 --seed 3 --corrupt 0.5") == 4);
    CHECK(run("gradcheck --arch no_such_arch") == 2);
}

TEST_CASE("augment identity settings reproduce the input exactly") {
    Rng rng(2);
    const Image patch = render_texture(skin_textures_7()[3], rng);
    const fs::path in = work_dir() / "aug_in.ppm";
    write_ppm(patch, in);
    const fs::path out = work_dir() / "aug_id";
    REQUIRE(run("augment --in " + in.string() + " --count 1 --out " + out.string()) == 0);
    CHECK(read_pnm(out / "aug_000.ppm").pixels == read_pnm(in).pixels);
}

TEST_CASE("augment transform log re-applies to the same output") {
    Rng rng(4);
    const Image patch = render_texture(skin_textures_7()[0], rng);
    const fs::path in = work_dir() / "aug_in2.ppm";
    write_ppm(patch, in);
    const fs::path out = work_dir() / "aug_rand";
    REQUIRE(run("augment --in " + in.string() +
                " --count 5 --theta 15 --tx 4 --ty 4 --shear 5 --zoom-min 0.9 --zoom-max 1.1"
                " --flip --seed 9 --out " + out.string()) == 0);

    const auto log = load_json(out / "transforms.json");
    REQUIRE(log.size() == 5);
    const Image original = read_pnm(in);
    for (const auto& entry : log) {
        AffineMatrix m;
        for (std::size_t i = 0; i < 9; ++i) m.m[i] = entry["matrix"][i].get<double>();
        Image redo = apply_affine(original, m, Interpolation::Nearest,
                                  entry["fill"].get<double>());
        if (entry["flip"].get<bool>()) redo = horizontal_flip(redo);
        const Image produced = read_pnm(out / entry["file"].get<std::string>());
        REQUIRE(redo.pixels.size() == produced.pixels.size());
        for (std::size_t i = 0; i < redo.pixels.size(); ++i) {
            CHECK(to_byte(redo.pixels[i]) == to_byte(produced.pixels[i]));
        }
    }
}

TEST_CASE("train/eval/detect/diagnose round trip on a small corpus") {
    const fs::path corpus = work_dir() / "corpus2";
    const fs::path vgg = work_dir() / "vgg";
    const fs::path head2 = work_dir() / "head2";
    REQUIRE(run("synth --classes 2 --per-class 12 --seed 3 --out " + corpus.string()) == 0);
    REQUIRE(run("init --arch vgg16_headless --seed 1 --out " + vgg.string()) == 0);

    // a head without extractor weights is a configuration error
    CHECK(run("train --arch classifier_head_2 --data " + corpus.string() + " --out " +
              (work_dir() / "nope").string()) == 2);

    REQUIRE(run("train --arch classifier_head_2 --data " + corpus.string() + " --extractor " +
                (vgg / "model.tpwf").string() + " --epochs 3 --lr 0.05 --seed 7 --out " +
                head2.string()) == 0);
    CHECK(fs::exists(head2 / "model.tpwf"));
    CHECK(fs::exists(head2 / "train_log.csv"));
    {
        std::ifstream log(head2 / "train_log.csv");
        std::string line;
        std::getline(log, line);
        CHECK(line == "epoch,train_loss,train_acc,val_loss,val_acc");
        std::size_t rows = 0;
        while (std::getline(log, line)) ++rows;
        CHECK(rows == 3);
    }

    const fs::path evald = work_dir() / "eval_model";
    REQUIRE(run("eval --model " + (head2 / "model.tpwf").string() + " --extractor " +
                (vgg / "model.tpwf").string() + " --data " + corpus.string() + " --seed 7 --out " +
                evald.string()) == 0);
    const auto report = load_json(evald / "report.json");
    REQUIRE(report.contains("rows"));
    REQUIRE(report["rows"].size() == 2);
    for (const auto& row : report["rows"]) {
        for (const char* key :
             {"positive_class", "auc", "youden_j", "best_threshold", "acc", "sen", "spe"}) {
            CHECK(row.contains(key));
        }
    }
    CHECK(fs::exists(evald / "roc.csv"));
    CHECK(fs::exists(evald / "confusion.csv"));
    CHECK(fs::exists(evald / "confusion_norm.csv"));

    // scores-file evaluation path
    const fs::path scores = work_dir() / "scores.csv";
    std::ofstream(scores) << "score,label\n0.9,1\n0.8,1\n0.3,0\n0.6,0\n0.7,1\n0.2,0\n";
    const fs::path evalc = work_dir() / "eval_scores";
    REQUIRE(run("eval --scores " + scores.string() + " --out " + evalc.string()) == 0);
    const auto sreport = load_json(evalc / "report.json");
    REQUIRE(sreport["rows"].size() == 2);
    CHECK(sreport["rows"][0]["auc"].get<double>() == doctest::Approx(1.0));
    CHECK(run("eval --out " + evalc.string()) == 2);  // neither scores nor model+data

    // 2x2 scene: top row skin, bottom row background
    Image scene(100, 100, 3);
    Rng scene_rng(11);
    const auto skins = skin_textures_7();
    for (int tr = 0; tr < 2; ++tr) {
        for (int tc = 0; tc < 2; ++tc) {
            const Image patch =
                render_texture(tr == 0 ? skins[static_cast<std::size_t>(tc)] : nonskin_texture(),
                               scene_rng);
            for (std::size_t r = 0; r < 50; ++r)
                for (std::size_t c = 0; c < 50; ++c)
                    for (std::size_t ch = 0; ch < 3; ++ch)
                        scene.at(tr * 50 + r, tc * 50 + c, ch) = patch.at(r, c, ch);
        }
    }
    const fs::path scene_path = work_dir() / "scene.ppm";
    write_ppm(scene, scene_path);

    const fs::path det = work_dir() / "detect_out";
    REQUIRE(run("detect --image " + scene_path.string() + " --head2 " +
                (head2 / "model.tpwf").string() + " --extractor " + (vgg / "model.tpwf").string() +
                " --out " + det.string()) == 0);
    CHECK(fs::exists(det / "mask.ppm"));
    {
        std::ifstream tiles(det / "tiles.csv");
        std::string line;
        std::getline(tiles, line);
        CHECK(line == "row,col,skin");
        std::size_t rows = 0;
        while (std::getline(tiles, line)) ++rows;
        CHECK(rows == 4);
    }

    const fs::path head7 = work_dir() / "head7";
    REQUIRE(run("init --arch classifier_head_7 --seed 2 --out " + head7.string()) == 0);
    const fs::path diag = work_dir() / "diagnose_out";
    REQUIRE(run("diagnose --image " + scene_path.string() + " --head2 " +
                (head2 / "model.tpwf").string() + " --head7 " + (head7 / "model.tpwf").string() +
                " --extractor " + (vgg / "model.tpwf").string() + " --out " + diag.string()) == 0);
    const auto dreport = load_json(diag / "report.json");
    CHECK(dreport["total_tile_count"] == 4);
    CHECK(dreport["per_tile"].size() == 4);
    CHECK(dreport["proportions"].size() == 7);
    CHECK(fs::exists(diag / "histogram.csv"));
    CHECK(fs::exists(diag / "mask.ppm"));
    CHECK(count_files(diag) >= 4);  // report, histogram, mask, config echo
}
