// end-to-end checks of the command-line surface: every subcommand is run as a
// child process against the committed fixtures and its artifacts are compared
// with what the library computes directly.

#include <doctest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsal/config.hpp"
#include "dsal/dataset.hpp"
#include "dsal/png_io.hpp"
#include "tmpdir.hpp"

namespace fs = std::filesystem;
using namespace dsal;

namespace {

const std::string kBin = DSAL_CLI_BIN;
const std::string kFix = DSAL_FIXTURES;

struct CliResult {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CliResult run_cli(const TempDir& td, const std::string& args) {
    static int n = 0;
    const std::string o = td.file("cli_out_" + std::to_string(n));
    const std::string e = td.file("cli_err_" + std::to_string(n));
    ++n;
    const std::string cmd = kBin + " " + args + " >" + o + " 2>" + e;
    const int rc = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("cli: dataset construction matches the library and is reproducible") {
    TempDir td;
    const std::string ids = kFix + "/build/ids";
    const std::string fix_csv = kFix + "/build/fixations.csv";
    const std::string out = td.dir("bd");

    const CliResult r =
        run_cli(td, "build-dataset --ids " + ids + " --fixations " + fix_csv + " --out " + out);
    REQUIRE(r.exit_code == 0);

    // artifacts in place
    for (const char* n : {"city_a", "city_b", "city_c"})
        CHECK(fs::exists(out + "/masks/" + std::string(n) + ".png"));

    // the manifest echoes the resolved run
    const auto manifest = KeyValueConfig::parse_file(out + "/manifest.txt");
    CHECK(manifest.get_string("command") == "build-dataset");
    CHECK(manifest.get_int("rejected_fixations") == 1);
    CHECK(manifest.get_real("sigma") == doctest::Approx(3.2));  // 64 px wide / 20
    CHECK(manifest.get_int("images") == 3);

    // never-fixated image -> empty ground truth
    const Tensor mc = read_png_gray(out + "/masks/city_c.png");
    double total = 0.0;
    for (size_t i = 0; i < mc.size(); ++i) total += mc[i];
    CHECK(total == 0.0);

    // city_a mask equals the library pipeline run by hand
    const Tensor ids_a = read_png_ids(ids + "/city_a.png");
    const auto parsed = parse_fixation_csv(fix_csv, ids_a.w(), ids_a.h());
    CHECK(parsed.rejected == 1);
    const FixationSet* set_a = nullptr;
    for (const auto& s : parsed.sets)
        if (s.image_id == "city_a") set_a = &s;
    REQUIRE(set_a != nullptr);
    const Tensor density = fixation_density(*set_a, ids_a.h(), ids_a.w(), 3.2);
    const auto instances = instances_from_ids(ids_a);
    auto table = score_table(instances, density);
    const auto chosen_ids = select_salient(table, 0.8);
    std::vector<ObjectInstance> chosen;
    for (const auto& obj : instances)
        for (long id : chosen_ids)
            if (obj.instance_id == id) chosen.push_back(obj);
    const Tensor expect = rasterize_ground_truth(chosen, ids_a.h(), ids_a.w());
    const Tensor got = read_png_gray(out + "/masks/city_a.png");
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) REQUIRE(got[i] == expect[i]);

    // score rows for city_a match table order, values and flags
    std::ifstream scores(out + "/scores.csv");
    std::string line;
    REQUIRE(std::getline(scores, line));
    CHECK(line == "image_id,instance_id,score,selected");
    size_t row = 0;
    while (std::getline(scores, line) && contains(line, "city_a,")) {
        REQUIRE(row < table.size());
        char id_buf[64];
        long iid = 0;
        double score = 0.0;
        int sel = -1;
        REQUIRE(sscanf(line.c_str(), "%63[^,],%ld,%lf,%d", id_buf, &iid, &score, &sel) == 4);
        CHECK(iid == table[row].instance_id);
        CHECK(score == doctest::Approx(table[row].score).epsilon(1e-9));
        CHECK(sel == (table[row].selected ? 1 : 0));
        ++row;
    }
    CHECK(row == table.size());

    // reruns are byte-identical
    const std::string out2 = td.dir("bd2");
    REQUIRE(run_cli(td, "build-dataset --ids " + ids + " --fixations " + fix_csv + " --out " +
                            out2)
                .exit_code == 0);
    CHECK(slurp(out + "/scores.csv") == slurp(out2 + "/scores.csv"));
    for (const char* n : {"city_a", "city_b", "city_c"})
        CHECK(slurp(out + "/masks/" + std::string(n) + ".png") ==
              slurp(out2 + "/masks/" + std::string(n) + ".png"));
}

TEST_CASE("cli: statistics over the constructed masks") {
    TempDir td;
    const std::string bd = td.dir("bd");
    REQUIRE(run_cli(td, "build-dataset --ids " + kFix + "/build/ids --fixations " + kFix +
                            "/build/fixations.csv --out " + bd)
                .exit_code == 0);

    const std::string out = td.dir("st");
    const CliResult r = run_cli(td, "stats --masks " + bd + "/masks --out " + out);
    REQUIRE(r.exit_code == 0);

    const Tensor am = read_png_gray(out + "/aam.png");
    CHECK(am.h() == 64);
    CHECK(am.w() == 128);
    CHECK(fs::exists(out + "/count_histogram.png"));
    CHECK(fs::exists(out + "/area_histogram.png"));

    // city_a and city_b carry one object each, city_c none
    std::ifstream ch(out + "/count_histogram.csv");
    std::string line;
    REQUIRE(std::getline(ch, line));
    CHECK(line == "objects,images");
    long total = 0, zero_bin = -1, one_bin = -1;
    while (std::getline(ch, line)) {
        long bin = 0, images = 0;
        REQUIRE(sscanf(line.c_str(), "%ld,%ld", &bin, &images) == 2);
        total += images;
        if (bin == 0) zero_bin = images;
        if (bin == 1) one_bin = images;
    }
    CHECK(total == 3);
    CHECK(zero_bin == 1);
    CHECK(one_bin == 2);
}

TEST_CASE("cli: two-stage training, inference, evaluation and benchmark comparison") {
    TempDir td;
    const std::string imgs = kFix + "/train/images";
    const std::string masks = kFix + "/train/masks";
    const std::string shape = " --override input_height=32 --override input_width=64";

    const std::string tg = td.dir("tg");
    CliResult r = run_cli(td, "train-general --images " + imgs + " --masks " + masks +
                                  " --out " + tg + " --override iterations=3" + shape);
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "iterations=3"));
    const std::string general_ckpt = tg + "/checkpoints/general_final.dsck";
    REQUIRE(fs::exists(general_ckpt));
    CHECK(fs::exists(tg + "/train_log.csv"));
    CHECK(fs::exists(tg + "/manifest.txt"));

    // a general-tower snapshot cannot drive inference
    const CliResult bad = run_cli(td, "infer --model " + general_ckpt + " --images " + imgs +
                                          " --out " + td.dir("nope"));
    CHECK(bad.exit_code == 3);
    CHECK(contains(bad.err, "error: data:"));

    const std::string tt = td.dir("tt");
    r = run_cli(td, "train-task --images " + imgs + " --masks " + masks + " --out " + tt +
                        " --init " + general_ckpt +
                        " --override iterations=3 --override use_pretrained_general=true" + shape);
    REQUIRE(r.exit_code == 0);
    const std::string task_ckpt = tt + "/checkpoints/task_final.dsck";
    REQUIRE(fs::exists(task_ckpt));

    const std::string inf = td.dir("inf");
    r = run_cli(td, "infer --model " + task_ckpt + " --images " + imgs + " --out " + inf);
    REQUIRE(r.exit_code == 0);
    int preds = 0;
    for (const auto& e : fs::directory_iterator(inf + "/pred"))
        if (e.path().extension() == ".png") ++preds;
    CHECK(preds == 8);

    // perfect predictions score (0, 1, 1, 1)
    const std::string ev = td.dir("ev");
    r = run_cli(td, "evaluate --pred " + masks + " --gt " + masks + " --out " + ev);
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "MAE        0.0000"));
    CHECK(contains(r.out, "F_beta     1.0000"));
    const std::string report = slurp(ev + "/report.csv");
    CHECK(contains(report, "mae,f_w_beta,f_beta,s_m,n_images,skipped_f"));
    CHECK(contains(report, "0.000000,1.000000,1.000000,1.000000,8,0"));

    // registry row straight off the table, then deltas against our report
    const std::string bench = td.dir("bench");
    r = run_cli(td, "benchmark --method Ours --phase after --registry " DSAL_DATA_DIR
                    "/benchmark_registry.csv --out " +
                        bench);
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "mae=0.133"));
    CHECK(contains(r.out, "f_beta=0.811"));

    r = run_cli(td, "benchmark --method Ours --phase after --registry " DSAL_DATA_DIR
                    "/benchmark_registry.csv --report " +
                        ev + "/report.csv --out " + td.dir("bench2"));
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "delta mae=-0.133000"));
    CHECK(contains(r.out, "f_beta=+0.189000"));
}

TEST_CASE("cli: gradient checking subcommand") {
    TempDir td;
    const std::string out = td.dir("gc");
    const CliResult r = run_cli(
        td, "grad-check --out " + out +
                " --override input_height=16 --override input_width=8 --override "
                "samples_per_group=6");
    REQUIRE(r.exit_code == 0);
    CHECK(contains(r.out, "status=ok"));
    const std::string csv = slurp(out + "/gradcheck.csv");
    CHECK(contains(csv, "group,checked,max_rel"));
    CHECK(contains(csv, "dec_fuse,6,"));
}

TEST_CASE("cli: usage and data failures map to the documented exit codes") {
    TempDir td;
    CHECK(run_cli(td, "").exit_code == 2);                       // no subcommand
    CHECK(run_cli(td, "frobnicate").exit_code == 2);             // unknown subcommand
    CHECK(run_cli(td, "evaluate --pred x").exit_code == 2);      // missing required options
    CHECK(run_cli(td, "--help").exit_code == 0);

    const std::string args = " --images x --masks y --out " + td.dir("z");
    CliResult r = run_cli(td, "train-task" + args + " --override broken");
    CHECK(r.exit_code == 2);
    CHECK(contains(r.err, "error: usage:"));

    r = run_cli(td, "train-task" + args + " --override itres=5");
    CHECK(r.exit_code == 3);  // typo'd key is rejected, not ignored
    CHECK(contains(r.err, "itres"));

    r = run_cli(td, "evaluate --pred /does/not/exist --gt /neither --out " + td.dir("e"));
    CHECK(r.exit_code == 3);
    CHECK(contains(r.err, "error: data:"));
    CHECK(!contains(r.err, "\n" + std::string("error")));  // a single line

    r = run_cli(td, "benchmark --method Nobody --registry " DSAL_DATA_DIR
                    "/benchmark_registry.csv --out " +
                        td.dir("b"));
    CHECK(r.exit_code == 3);
}
