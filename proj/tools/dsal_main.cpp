// dsal: dataset construction, training, inference, evaluation and benchmark
// comparison as subcommands over the library. Exit codes: 0 ok, 2 usage,
// 3 bad data, 4 numerical divergence. Errors are single machine-parsable
// lines on stderr:  error: <usage|data|divergence|internal>: <message>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsal/checkpoint.hpp"
#include "dsal/common.hpp"
#include "dsal/config.hpp"
#include "dsal/dataset.hpp"
#include "dsal/image.hpp"
#include "dsal/metrics.hpp"
#include "dsal/model.hpp"
#include "dsal/png_io.hpp"
#include "dsal/train.hpp"

namespace fs = std::filesystem;
using namespace dsal;

namespace {

// malformed command line discovered past CLI11 (e.g. an --override without '=')
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ';');
    return s;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// ---- shared option plumbing ---------------------------------------------------

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string out;
    bool deterministic = false;
};

void add_common(CLI::App* sub, CommonOpts& c, bool out_required = true) {
    sub->add_option("--config", c.config_path, "key = value settings file");
    sub->add_option("--override", c.overrides, "set one config key (key=value, repeatable)")
        ->type_size(1);
    auto* out = sub->add_option("--out", c.out, "output directory; every artifact lands here");
    if (out_required) out->required();
    sub->add_flag("--deterministic", c.deterministic,
                  "force single-threaded execution (the build already is; recorded in the "
                  "manifest for reproducibility)");
}

// config file + overrides, validated against the subcommand's key list
KeyValueConfig resolve_config(const CommonOpts& c, const std::vector<std::string>& allowed) {
    KeyValueConfig kv;
    if (!c.config_path.empty()) kv = KeyValueConfig::parse_file(c.config_path);
    for (const auto& ov : c.overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("--override expects key=value, got '" + ov + "'");
        kv.set(ov.substr(0, eq), ov.substr(eq + 1));
    }
    kv.require_known(allowed);
    return kv;
}

using Entries = std::vector<std::pair<std::string, std::string>>;

void finish_manifest(const CommonOpts& c, const std::string& command, Entries entries) {
    entries.insert(entries.begin(), {"command", command});
    entries.emplace_back("deterministic", c.deterministic ? "1" : "0");
    write_manifest((fs::path(c.out) / "manifest.txt").string(), entries);
}

// sorted *.png basenames (without extension the callers re-append)
std::vector<std::string> png_names(const std::string& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no .png files in " + dir);
    return names;
}

// training pairs: images and masks matched by basename, strict set equality
std::vector<Sample> load_pairs(const std::string& image_dir, const std::string& mask_dir) {
    const auto inames = png_names(image_dir);
    const auto mnames = png_names(mask_dir);
    if (inames != mnames) {
        std::vector<std::string> off;
        std::set_difference(inames.begin(), inames.end(), mnames.begin(), mnames.end(),
                            std::back_inserter(off));
        std::set_difference(mnames.begin(), mnames.end(), inames.begin(), inames.end(),
                            std::back_inserter(off));
        std::string msg = "image/mask sets differ:";
        for (const auto& n : off) msg += " " + n;
        throw DataError(msg);
    }
    std::vector<Sample> out;
    for (const auto& n : inames) {
        Sample s;
        s.image = read_png_rgb((fs::path(image_dir) / (n + ".png")).string());
        s.mask = read_png_gray((fs::path(mask_dir) / (n + ".png")).string());
        for (size_t i = 0; i < s.mask.size(); ++i) s.mask[i] = s.mask[i] > 0.5 ? 1.0 : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

// ---- model / training config keys ----------------------------------------------

const std::vector<std::string> kModelKeys = {
    "encoder_scale", "input_height",  "input_width", "decoder_channels",
    "use_akt",       "use_bfd",       "use_pretrained_general", "model_seed"};

ModelConfig model_from_config(const KeyValueConfig& kv) {
    ModelConfig mc;
    const std::string scale = kv.get_string("encoder_scale", "tiny");
    if (scale == "tiny")
        mc.encoder_scale = EncoderScale::Tiny;
    else if (scale == "paper")
        mc.encoder_scale = EncoderScale::Paper;
    else
        throw DataError("encoder_scale must be tiny or paper, got '" + scale + "'");
    mc.input_height = static_cast<int>(kv.get_int("input_height", 256));
    mc.input_width = static_cast<int>(kv.get_int("input_width", 512));
    mc.decoder_channels = static_cast<int>(kv.get_int("decoder_channels", 0));
    mc.use_akt = kv.get_bool("use_akt", true);
    mc.use_bfd = kv.get_bool("use_bfd", true);
    mc.use_pretrained_general = kv.get_bool("use_pretrained_general", false);
    return mc;
}

void echo_model(Entries& e, const ModelConfig& mc, std::uint64_t seed) {
    e.emplace_back("encoder_scale", mc.encoder_scale == EncoderScale::Tiny ? "tiny" : "paper");
    e.emplace_back("input_height", std::to_string(mc.input_height));
    e.emplace_back("input_width", std::to_string(mc.input_width));
    e.emplace_back("decoder_channels", std::to_string(mc.decoder_channels));
    e.emplace_back("use_akt", mc.use_akt ? "1" : "0");
    e.emplace_back("use_bfd", mc.use_bfd ? "1" : "0");
    e.emplace_back("use_pretrained_general", mc.use_pretrained_general ? "1" : "0");
    e.emplace_back("model_seed", std::to_string(seed));
}

const std::vector<std::string> kTrainKeys = {
    "learning_rate", "head_lr_multiplier", "weight_decay", "momentum",
    "batch_size",    "iterations",         "flip",         "seed"};

TrainConfig train_from_config(const KeyValueConfig& kv, const std::string& out) {
    TrainConfig tc;
    tc.learning_rate = kv.get_real("learning_rate", tc.learning_rate);
    tc.head_lr_multiplier = kv.get_real("head_lr_multiplier", tc.head_lr_multiplier);
    tc.weight_decay = kv.get_real("weight_decay", tc.weight_decay);
    tc.momentum = kv.get_real("momentum", tc.momentum);
    tc.batch_size = static_cast<int>(kv.get_int("batch_size", tc.batch_size));
    if (!kv.has("iterations")) throw DataError("config: iterations is required");
    tc.iterations = kv.get_int("iterations");
    tc.flip = kv.get_bool("flip", tc.flip);
    tc.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    tc.checkpoint_dir = (fs::path(out) / "checkpoints").string();
    tc.log_path = (fs::path(out) / "train_log.csv").string();
    return tc;
}

void echo_train(Entries& e, const TrainConfig& tc) {
    e.emplace_back("learning_rate", fmt("%g", tc.learning_rate));
    e.emplace_back("head_lr_multiplier", fmt("%g", tc.head_lr_multiplier));
    e.emplace_back("weight_decay", fmt("%g", tc.weight_decay));
    e.emplace_back("momentum", fmt("%g", tc.momentum));
    e.emplace_back("batch_size", std::to_string(tc.batch_size));
    e.emplace_back("iterations", std::to_string(tc.iterations));
    e.emplace_back("flip", tc.flip ? "1" : "0");
    e.emplace_back("seed", std::to_string(tc.seed));
}

// ---- build-dataset ---------------------------------------------------------------

struct BuildOpts {
    CommonOpts common;
    std::string ids_dir, fixation_csv;
};

void run_build_dataset(const BuildOpts& o) {
    const auto kv = resolve_config(o.common, {"sigma", "select_ratio"});
    const double sigma_key = kv.get_real("sigma", 0.0);
    if (sigma_key < 0.0) throw DataError("sigma must be >= 0 (0 = width-derived default)");
    const double ratio = kv.get_real("select_ratio", 0.8);

    const auto names = png_names(o.ids_dir);
    std::vector<Tensor> grids;
    for (const auto& n : names)
        grids.push_back(read_png_ids((fs::path(o.ids_dir) / (n + ".png")).string()));
    const int height = grids.front().h(), width = grids.front().w();
    for (size_t i = 1; i < grids.size(); ++i)
        if (grids[i].h() != height || grids[i].w() != width)
            throw DataError(fmt("instance grids must share one resolution: %s is %dx%d, %s is "
                                "%dx%d",
                                names[0].c_str(), width, height, names[i].c_str(), grids[i].w(),
                                grids[i].h()));

    const FixationParse parsed = parse_fixation_csv(o.fixation_csv, width, height);
    std::map<std::string, const FixationSet*> by_id;
    for (const auto& s : parsed.sets) {
        if (std::find(names.begin(), names.end(), s.image_id) == names.end())
            throw DataError("fixation image_id has no instance grid: " + s.image_id);
        by_id[s.image_id] = &s;
    }

    const double sigma = sigma_key > 0.0 ? sigma_key : default_density_sigma(width);
    fs::create_directories(fs::path(o.common.out) / "masks");

    std::ofstream scores((fs::path(o.common.out) / "scores.csv").string());
    scores << "image_id,instance_id,score,selected\n";
    for (size_t i = 0; i < names.size(); ++i) {
        const auto instances = instances_from_ids(grids[i]);
        FixationSet fix;  // images without fixations keep an all-zero density
        fix.image_id = names[i];
        if (auto it = by_id.find(names[i]); it != by_id.end()) fix = *it->second;
        const Tensor density = fixation_density(fix, height, width, sigma);

        auto table = score_table(instances, density);
        const auto selected_ids = select_salient(table, ratio);
        for (size_t r = 0; r < table.size(); ++r)
            scores << names[i] << ',' << table[r].instance_id << ','
                   << fmt("%.12g", table[r].score) << ',' << (table[r].selected ? 1 : 0) << '\n';

        std::vector<ObjectInstance> chosen;
        for (const auto& obj : instances)
            if (std::find(selected_ids.begin(), selected_ids.end(), obj.instance_id) !=
                selected_ids.end())
                chosen.push_back(obj);
        const Tensor mask = rasterize_ground_truth(chosen, height, width);
        write_png_gray((fs::path(o.common.out) / "masks" / (names[i] + ".png")).string(), mask);
    }
    scores.close();

    Entries e{{"ids", o.ids_dir},
              {"fixations", o.fixation_csv},
              {"out", o.common.out},
              {"sigma", fmt("%g", sigma)},
              {"select_ratio", fmt("%g", ratio)},
              {"images", std::to_string(names.size())},
              {"rejected_fixations", std::to_string(parsed.rejected)}};
    finish_manifest(o.common, "build-dataset", std::move(e));
    std::cout << "wrote " << names.size() << " masks and scores.csv under " << o.common.out
              << " (rejected_fixations=" << parsed.rejected << ")\n";
}

// ---- stats -------------------------------------------------------------------------

struct StatsOpts {
    CommonOpts common;
    std::string mask_dir;
};

// minimal bar chart so the statistics ship with a visual alongside the CSVs
Tensor render_bars(const std::vector<long>& counts) {
    const int bins = static_cast<int>(counts.size());
    const int bar_w = 12, gap = 4, h = 120, pad = 8;
    const int w = pad * 2 + bins * bar_w + (bins - 1) * gap;
    Tensor img = Tensor::zeros(1, 1, h + 2 * pad, std::max(w, 32));
    long peak = 1;
    for (long c : counts) peak = std::max(peak, c);
    for (int b = 0; b < bins; ++b) {
        const int bh = static_cast<int>(std::lround(static_cast<double>(counts[b]) * h / peak));
        const int x0 = pad + b * (bar_w + gap);
        for (int y = 0; y < bh; ++y)
            for (int x = 0; x < bar_w; ++x) img.at(0, 0, h + pad - 1 - y, x0 + x) = 1.0;
    }
    return img;
}

void run_stats(const StatsOpts& o) {
    const auto kv = resolve_config(o.common, {"aam_height", "aam_width"});
    const int ah = static_cast<int>(kv.get_int("aam_height", 64));
    const int aw = static_cast<int>(kv.get_int("aam_width", 128));

    const auto names = png_names(o.mask_dir);
    std::vector<Tensor> masks;
    for (const auto& n : names) {
        Tensor m = read_png_gray((fs::path(o.mask_dir) / (n + ".png")).string());
        for (size_t i = 0; i < m.size(); ++i) m[i] = m[i] > 0.5 ? 1.0 : 0.0;
        masks.push_back(std::move(m));
    }

    fs::create_directories(o.common.out);
    write_png_gray((fs::path(o.common.out) / "aam.png").string(), aam(masks, ah, aw));

    const DatasetStats st = dataset_stats(masks);
    {
        std::ofstream f((fs::path(o.common.out) / "count_histogram.csv").string());
        f << "objects,images\n";
        for (size_t b = 0; b < st.count_histogram.size(); ++b)
            f << b << ',' << st.count_histogram[b] << '\n';
    }
    {
        std::ofstream f((fs::path(o.common.out) / "area_histogram.csv").string());
        f << "bin_lo,bin_hi,images\n";
        for (size_t b = 0; b < st.area_histogram.size(); ++b)
            f << fmt("%.1f,%.1f,%ld", b * 0.1, (b + 1) * 0.1, st.area_histogram[b]) << '\n';
    }
    write_png_gray((fs::path(o.common.out) / "count_histogram.png").string(),
                   render_bars(st.count_histogram));
    write_png_gray((fs::path(o.common.out) / "area_histogram.png").string(),
                   render_bars(st.area_histogram));

    Entries e{{"masks", o.mask_dir},
              {"out", o.common.out},
              {"aam_height", std::to_string(ah)},
              {"aam_width", std::to_string(aw)},
              {"images", std::to_string(names.size())}};
    finish_manifest(o.common, "stats", std::move(e));
    std::cout << "stats over " << names.size() << " masks written under " << o.common.out << "\n";
}

// ---- training ---------------------------------------------------------------------

struct TrainOpts {
    CommonOpts common;
    std::string image_dir, mask_dir, init_ckpt;
};

void run_train(const TrainOpts& o, bool general) {
    std::vector<std::string> allowed = kModelKeys;
    allowed.insert(allowed.end(), kTrainKeys.begin(), kTrainKeys.end());
    const auto kv = resolve_config(o.common, allowed);

    const ModelConfig mc = model_from_config(kv);
    const auto model_seed = static_cast<std::uint64_t>(kv.get_int("model_seed", 1));
    Model m(mc, model_seed);
    if (!o.init_ckpt.empty()) load_into_model(o.init_ckpt, m);

    const TrainConfig tc = train_from_config(kv, o.common.out);
    fs::create_directories(o.common.out);

    Entries e{{"images", o.image_dir}, {"masks", o.mask_dir}, {"out", o.common.out}};
    if (!o.init_ckpt.empty()) e.emplace_back("init", o.init_ckpt);
    echo_model(e, mc, model_seed);
    echo_train(e, tc);
    finish_manifest(o.common, general ? "train-general" : "train-task", std::move(e));

    const auto data = load_pairs(o.image_dir, o.mask_dir);
    const TrainResult r = general ? train_general(m, data, tc) : train_task(m, data, tc);
    std::cout << fmt("initial_loss=%.6f final_loss=%.6f iterations=%ld checkpoints=%zu\n",
                     r.initial_loss, r.final_loss, r.iterations_run, r.checkpoint_paths.size());
    if (!r.checkpoint_paths.empty()) std::cout << "final=" << r.checkpoint_paths.back() << "\n";
}

// ---- inference ---------------------------------------------------------------------

struct InferOpts {
    CommonOpts common;
    std::string model_ckpt, image_dir;
};

void run_infer(const InferOpts& o) {
    resolve_config(o.common, {});  // rejects stray keys; inference has none
    const Checkpoint ck = load_checkpoint(o.model_ckpt);
    if (ck.kind != CheckpointKind::Full)
        throw DataError("infer: needs a full checkpoint (got a general-tower snapshot)");
    Model m(ck.config, ck.seed);
    load_into_model(o.model_ckpt, m);

    const auto names = png_names(o.image_dir);
    fs::create_directories(fs::path(o.common.out) / "pred");
    for (const auto& n : names) {
        const Tensor img = read_png_rgb((fs::path(o.image_dir) / (n + ".png")).string());
        const Tensor pred = m.infer(img);
        write_png_gray((fs::path(o.common.out) / "pred" / (n + ".png")).string(), pred);
    }

    Entries e{{"model", o.model_ckpt}, {"images", o.image_dir}, {"out", o.common.out}};
    echo_model(e, ck.config, ck.seed);
    e.emplace_back("predictions", std::to_string(names.size()));
    finish_manifest(o.common, "infer", std::move(e));
    std::cout << "predictions=" << names.size() << " dir=" << (fs::path(o.common.out) / "pred").string()
              << "\n";
}

// ---- evaluation --------------------------------------------------------------------

struct EvalOpts {
    CommonOpts common;
    std::string pred_dir, gt_dir;
};

void run_evaluate(const EvalOpts& o) {
    resolve_config(o.common, {});
    const MetricReport r = evaluate_dirs(o.pred_dir, o.gt_dir);
    fs::create_directories(o.common.out);
    std::ofstream((fs::path(o.common.out) / "report.csv").string()) << report_csv(r);
    std::cout << report_text(r);

    Entries e{{"pred", o.pred_dir},
              {"gt", o.gt_dir},
              {"out", o.common.out},
              {"n_images", std::to_string(r.n_images)},
              {"skipped_f", std::to_string(r.skipped_f)}};
    finish_manifest(o.common, "evaluate", std::move(e));
}

// ---- benchmark ---------------------------------------------------------------------

struct BenchOpts {
    CommonOpts common;
    std::string method, phase = "after";
    std::string registry = "data/benchmark_registry.csv";
    std::string report_csv_path;
};

MetricReport parse_report_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open report: " + path);
    std::string header, row;
    if (!std::getline(f, header) || header != "mae,f_w_beta,f_beta,s_m,n_images,skipped_f")
        throw DataError("report header mismatch in " + path);
    if (!std::getline(f, row)) throw DataError("report row missing in " + path);
    MetricReport r;
    if (sscanf(row.c_str(), "%lf,%lf,%lf,%lf,%d,%d", &r.mae, &r.weighted_f_beta, &r.f_beta,
               &r.s_measure, &r.n_images, &r.skipped_f) != 6)
        throw DataError("report row malformed in " + path);
    return r;
}

void run_benchmark(const BenchOpts& o) {
    resolve_config(o.common, {});
    const auto rows = load_registry(o.registry);
    const RegistryRow* row = registry_lookup(rows, o.method, o.phase);
    if (!row) throw DataError("registry has no row for " + o.method + "/" + o.phase);
    std::cout << fmt("method=%s phase=%s mae=%.3f f_w_beta=%.3f f_beta=%.3f s_m=%.3f "
                     "uses_crf=%d\n",
                     row->method.c_str(), row->phase.c_str(), row->mae, row->f_w_beta,
                     row->f_beta, row->s_m, row->uses_crf ? 1 : 0);

    Entries e{{"registry", o.registry},
              {"method", o.method},
              {"phase", o.phase},
              {"out", o.common.out}};
    if (!o.report_csv_path.empty()) {
        const MetricReport rep = parse_report_csv(o.report_csv_path);
        const RegistryDelta d = registry_compare(rep, rows, o.method, o.phase);
        std::cout << fmt("delta mae=%+.6f f_w_beta=%+.6f f_beta=%+.6f s_m=%+.6f\n", d.d_mae,
                         d.d_f_w_beta, d.d_f_beta, d.d_s_m);
        e.emplace_back("report", o.report_csv_path);
    }
    fs::create_directories(o.common.out);
    finish_manifest(o.common, "benchmark", std::move(e));
}

// ---- gradient check ----------------------------------------------------------------

struct GradOpts {
    CommonOpts common;
    std::string init_ckpt;
};

void run_grad_check(const GradOpts& o) {
    std::vector<std::string> allowed = kModelKeys;
    allowed.insert(allowed.end(), {"samples_per_group", "seed", "tolerance"});
    const auto kv = resolve_config(o.common, allowed);

    const ModelConfig mc = model_from_config(kv);
    const auto model_seed = static_cast<std::uint64_t>(kv.get_int("model_seed", 1));
    const int spg = static_cast<int>(kv.get_int("samples_per_group", 200));
    const auto seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
    const double tol = kv.get_real("tolerance", 1e-3);

    Model m(mc, model_seed);
    if (!o.init_ckpt.empty()) load_into_model(o.init_ckpt, m);

    Rng rng(seed ^ 0x5bd1e995u);
    Tensor images(1, 3, mc.input_height, mc.input_width);
    Tensor masks(1, 1, mc.input_height, mc.input_width);
    for (size_t i = 0; i < images.size(); ++i) images[i] = rng.uniform();
    for (size_t i = 0; i < masks.size(); ++i) masks[i] = rng.coin() ? 1.0 : 0.0;

    const GradCheckReport rep = grad_check(m, images, masks, spg, seed);

    fs::create_directories(o.common.out);
    std::ofstream csv((fs::path(o.common.out) / "gradcheck.csv").string());
    csv << "group,checked,max_rel\n";
    for (const auto& g : rep.groups) {
        csv << g.group << ',' << g.checked << ',' << fmt("%.9e", g.max_rel) << '\n';
        std::cout << fmt("group=%s checked=%d max_rel=%.3e\n", g.group.c_str(), g.checked,
                         g.max_rel);
    }
    const bool ok = rep.max_rel < tol;
    std::cout << fmt("max_rel=%.3e tolerance=%.1e status=%s\n", rep.max_rel, tol,
                     ok ? "ok" : "FAIL");

    Entries e;
    echo_model(e, mc, model_seed);
    e.emplace_back("samples_per_group", std::to_string(spg));
    e.emplace_back("seed", std::to_string(seed));
    e.emplace_back("tolerance", fmt("%g", tol));
    e.emplace_back("max_rel", fmt("%.9e", rep.max_rel));
    e.emplace_back("out", o.common.out);
    finish_manifest(o.common, "grad-check", std::move(e));
    if (!ok) throw std::runtime_error(fmt("gradient check failed: max_rel %.3e >= %.1e",
                                          rep.max_rel, tol));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driving-scene salient-object pipeline: dataset construction, training, "
                 "inference, evaluation, statistics and benchmark comparison"};
    app.require_subcommand(1);
    app.footer(
        "file formats (bit-exact):\n"
        "  fixation CSV     header image_id,x,y,duration_ms; coordinates in [0,W)x[0,H),\n"
        "                   duration_ms > 0; offending rows are dropped and counted\n"
        "  instance PNG     16-bit grayscale; values >= 1000 are category*1000+index,\n"
        "                   7..33 are single-instance stuff labels, below 7 is void\n"
        "  mask PNG         8-bit grayscale, foreground 255, background 0\n"
        "  scores CSV       header image_id,instance_id,score,selected\n"
        "  report CSV       header mae,f_w_beta,f_beta,s_m,n_images,skipped_f + one row\n"
        "  registry CSV     header method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\n"
        "  histogram CSVs   objects,images / bin_lo,bin_hi,images\n"
        "  checkpoints      magic DSCK, version, FNV-1a checksum, config echo, seed,\n"
        "                   name-ordered little-endian f64 blobs\n"
        "  manifest.txt     resolved key = value config echo, one per run\n"
        "exit codes: 0 ok, 2 usage error, 3 data error, 4 numerical divergence");

    BuildOpts build;
    auto* sb = app.add_subcommand("build-dataset",
                                  "fixations + instance grids -> binary masks and a score table");
    sb->add_option("--ids", build.ids_dir, "directory of instance-id PNGs")->required();
    sb->add_option("--fixations", build.fixation_csv, "fixation CSV")->required();
    add_common(sb, build.common);

    StatsOpts stats;
    auto* ss = app.add_subcommand(
        "stats", "mask statistics: average annotation map, object-count and area histograms");
    ss->add_option("--masks", stats.mask_dir, "directory of binary mask PNGs")->required();
    add_common(ss, stats.common);

    TrainOpts tg;
    auto* sg = app.add_subcommand("train-general",
                                  "pretrain the general tower on generic saliency pairs");
    sg->add_option("--images", tg.image_dir, "directory of RGB PNGs")->required();
    sg->add_option("--masks", tg.mask_dir, "directory of mask PNGs (same basenames)")->required();
    sg->add_option("--init", tg.init_ckpt, "checkpoint to load before training");
    add_common(sg, tg.common);

    TrainOpts tt;
    auto* st = app.add_subcommand("train-task",
                                  "fine-tune on the driving task with the general tower frozen");
    st->add_option("--images", tt.image_dir, "directory of RGB PNGs")->required();
    st->add_option("--masks", tt.mask_dir, "directory of mask PNGs (same basenames)")->required();
    st->add_option("--init", tt.init_ckpt,
                   "checkpoint to load first (a general-tower snapshot enables transfer)");
    add_common(st, tt.common);

    InferOpts inf;
    auto* si = app.add_subcommand("infer", "run a trained model over a directory of images");
    si->add_option("--model", inf.model_ckpt, "full checkpoint")->required();
    si->add_option("--images", inf.image_dir, "directory of RGB PNGs")->required();
    add_common(si, inf.common);

    EvalOpts ev;
    auto* se = app.add_subcommand("evaluate",
                                  "score predictions against ground truth (MAE, F, wF, S)");
    se->add_option("--pred", ev.pred_dir, "directory of prediction PNGs")->required();
    se->add_option("--gt", ev.gt_dir, "directory of ground-truth PNGs")->required();
    add_common(se, ev.common);

    BenchOpts bench;
    auto* sn = app.add_subcommand("benchmark", "print a published-number registry row and, "
                                               "optionally, deltas against a report");
    sn->add_option("--method", bench.method, "method name as listed in the registry")->required();
    sn->add_option("--phase", bench.phase, "before | after (default after)");
    sn->add_option("--registry", bench.registry, "registry CSV path");
    sn->add_option("--report", bench.report_csv_path, "report.csv from `evaluate` to diff");
    add_common(sn, bench.common);

    GradOpts gc;
    auto* sc = app.add_subcommand("grad-check",
                                  "compare analytic gradients against central differences");
    sc->add_option("--init", gc.init_ckpt, "checkpoint to load before checking");
    add_common(sc, gc.common);

    sb->callback([&] { run_build_dataset(build); });
    ss->callback([&] { run_stats(stats); });
    sg->callback([&] { run_train(tg, true); });
    st->callback([&] { run_train(tt, false); });
    si->callback([&] { run_infer(inf); });
    se->callback([&] { run_evaluate(ev); });
    sn->callback([&] { run_benchmark(bench); });
    sc->callback([&] { run_grad_check(gc); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: data: " << one_line(e.what()) << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: divergence: " << one_line(e.what()) << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
