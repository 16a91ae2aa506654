#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "dsal/autograd.hpp"
#include "dsal/common.hpp"
#include "dsal/metrics.hpp"
#include "dsal/png_io.hpp"
#include "oracles.hpp"
#include "tmpdir.hpp"

using namespace dsal;

namespace {

Tensor rand_pred(Rng& rng, int h, int w) {
    Tensor t(1, 1, h, w);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform();
    return t;
}

Tensor rand_mask(Rng& rng, int h, int w, double p) {
    Tensor t(1, 1, h, w);
    for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() < p ? 1.0 : 0.0;
    return t;
}

}  // namespace

// ---- single-image metrics vs the loop references --------------------------------

TEST_CASE("metrics: agreement with the reference implementations on random maps") {
    Rng rng(1234);
    int undefined_seen = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const double density = 0.05 + 0.9 * (trial / 49.0);
        const Tensor pred = rand_pred(rng, 8, 8);
        const Tensor gt = rand_mask(rng, 8, 8, density);

        CHECK(metric_mae(pred, gt) == oracle::mae(pred, gt));

        bool def_impl = true, def_ref = true;
        const double f_impl = metric_f_beta(pred, gt, &def_impl);
        const double f_ref = oracle::f_beta(pred, gt, &def_ref);
        REQUIRE(def_impl == def_ref);
        CHECK(f_impl == doctest::Approx(f_ref).epsilon(1e-12));

        const double wf_impl = metric_weighted_f_beta(pred, gt, &def_impl);
        const double wf_ref = oracle::weighted_f_beta(pred, gt, &def_ref);
        REQUIRE(def_impl == def_ref);
        if (!def_impl) ++undefined_seen;
        CHECK(wf_impl == doctest::Approx(wf_ref).epsilon(1e-9));

        CHECK(metric_s_measure(pred, gt) ==
              doctest::Approx(oracle::s_measure(pred, gt)).epsilon(1e-12));
    }
    // the sweep should have produced at least one empty mask and plenty of
    // non-degenerate ones
    CHECK(undefined_seen < 25);
}

TEST_CASE("metrics: a perfect prediction scores (0, 1, 1, 1)") {
    Rng rng(9);
    const Tensor gt = rand_mask(rng, 12, 12, 0.4);
    const Tensor pred = gt;
    bool defined = false;
    CHECK(metric_mae(pred, gt) == 0.0);
    CHECK(metric_f_beta(pred, gt, &defined) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(defined);
    CHECK(metric_weighted_f_beta(pred, gt, &defined) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(metric_s_measure(pred, gt) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("metrics: constant half prediction has MAE exactly one half") {
    Rng rng(10);
    const Tensor gt = rand_mask(rng, 8, 8, 0.5);
    Tensor pred(1, 1, 8, 8);
    pred.fill(0.5);
    CHECK(metric_mae(pred, gt) == 0.5);
}

TEST_CASE("metrics: ground truth is binarized at one half") {
    Tensor pred(1, 1, 2, 2), gt(1, 1, 2, 2);
    pred.fill(0.7);
    gt.fill(0.7);  // reads as foreground
    CHECK(metric_mae(pred, gt) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("metrics: hand-checked F value") {
    // two foreground pixels, exactly one of them predicted with certainty:
    // precision 1, recall 1/2 at every threshold -> 1.3*0.5/(0.3+0.5)
    Tensor pred = Tensor::zeros(1, 1, 2, 3);
    Tensor gt = Tensor::zeros(1, 1, 2, 3);
    gt.at(0, 0, 0, 0) = 1.0;
    gt.at(0, 0, 1, 2) = 1.0;
    pred.at(0, 0, 0, 0) = 1.0;
    bool defined = false;
    CHECK(metric_f_beta(pred, gt, &defined) == doctest::Approx(0.8125).epsilon(1e-12));
    CHECK(defined);
}

TEST_CASE("metrics: empty ground truth marks both F measures undefined") {
    Rng rng(11);
    const Tensor pred = rand_pred(rng, 8, 8);
    const Tensor gt = Tensor::zeros(1, 1, 8, 8);
    bool defined = true;
    CHECK(metric_f_beta(pred, gt, &defined) == 0.0);
    CHECK_FALSE(defined);
    defined = true;
    CHECK(metric_weighted_f_beta(pred, gt, &defined) == 0.0);
    CHECK_FALSE(defined);
}

TEST_CASE("metrics: weighted F resolves equidistant neighbors deterministically") {
    // the middle pixel is equidistant to both foreground pixels; the copied
    // error must come from the leftmost one
    Tensor pred(1, 1, 1, 3), gt(1, 1, 1, 3);
    gt[0] = 1.0;
    gt[1] = 0.0;
    gt[2] = 1.0;
    pred[0] = 0.2;
    pred[1] = 0.5;
    pred[2] = 0.9;
    bool defined = false;
    const double v = metric_weighted_f_beta(pred, gt, &defined);
    CHECK(v == doctest::Approx(oracle::weighted_f_beta(pred, gt, &defined)).epsilon(1e-12));
    CHECK(v > 0.0);
    CHECK(v < 1.0);
}

TEST_CASE("metrics: structure measure falls back to means on degenerate masks") {
    Rng rng(12);
    const Tensor pred = rand_pred(rng, 6, 6);
    double mean = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) mean += pred[i];
    mean /= static_cast<double>(pred.size());

    const Tensor none = Tensor::zeros(1, 1, 6, 6);
    Tensor all(1, 1, 6, 6);
    all.fill(1.0);
    CHECK(metric_s_measure(pred, none) == 1.0 - mean);
    CHECK(metric_s_measure(pred, all) == mean);
}

TEST_CASE("metrics: structure measure of an inverted prediction is clamped, never negative") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor gt = rand_mask(rng, 8, 8, 0.3 + 0.05 * trial);
        Tensor pred(1, 1, 8, 8);
        for (size_t i = 0; i < gt.size(); ++i) pred[i] = 1.0 - gt[i];
        const double s = metric_s_measure(pred, gt);
        CHECK(s >= 0.0);
        CHECK(s == doctest::Approx(oracle::s_measure(pred, gt)).epsilon(1e-12));
    }
}

TEST_CASE("metrics: shape mismatches are rejected") {
    Tensor a(1, 1, 4, 4), b(1, 1, 4, 5);
    CHECK_THROWS(metric_mae(a, b));
    CHECK_THROWS(metric_f_beta(a, b, nullptr));
    CHECK_THROWS(metric_weighted_f_beta(a, b, nullptr));
    CHECK_THROWS(metric_s_measure(a, b));
}

// ---- directory evaluation ----------------------------------------------------------

TEST_CASE("evaluate_dirs: averages over pairs, resizing and skipping as documented") {
    TempDir td;
    const auto preds = td.dir("preds");
    const auto gts = td.dir("gts");
    Rng rng(21);

    // a: plain pair;  b: prediction at twice the resolution;  c: empty mask
    write_png_gray(preds + "/a.png", rand_pred(rng, 8, 8));
    write_png_gray(gts + "/a.png", rand_mask(rng, 8, 8, 0.5));
    write_png_gray(preds + "/b.png", rand_pred(rng, 16, 16));
    write_png_gray(gts + "/b.png", rand_mask(rng, 8, 8, 0.5));
    write_png_gray(preds + "/c.png", rand_pred(rng, 8, 8));
    write_png_gray(gts + "/c.png", Tensor::zeros(1, 1, 8, 8));

    const MetricReport r = evaluate_dirs(preds, gts);
    CHECK(r.n_images == 3);
    CHECK(r.skipped_f == 1);

    // recompute through the same file contents
    double mae = 0.0, s = 0.0, f = 0.0, wf = 0.0;
    for (const std::string name : {"a.png", "b.png", "c.png"}) {
        Tensor p = read_png_gray(preds + "/" + name);
        const Tensor g = read_png_gray(gts + "/" + name);
        if (!p.same_shape(g)) p = resize_bilinear_value(p, g.h(), g.w());
        mae += metric_mae(p, g);
        s += metric_s_measure(p, g);
        bool defined = true;
        const double fv = metric_f_beta(p, g, &defined);
        if (defined) {
            f += fv;
            wf += metric_weighted_f_beta(p, g, nullptr);
        }
    }
    CHECK(r.mae == mae / 3.0);
    CHECK(r.s_measure == s / 3.0);
    CHECK(r.f_beta == f / 2.0);
    CHECK(r.weighted_f_beta == wf / 2.0);
}

TEST_CASE("evaluate_dirs: unpaired files are a hard error naming the offenders") {
    TempDir td;
    const auto preds = td.dir("preds");
    const auto gts = td.dir("gts");
    Rng rng(22);
    write_png_gray(preds + "/a.png", rand_pred(rng, 8, 8));
    write_png_gray(gts + "/a.png", rand_mask(rng, 8, 8, 0.5));
    write_png_gray(preds + "/d.png", rand_pred(rng, 8, 8));
    try {
        evaluate_dirs(preds, gts);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("d.png") != std::string::npos);
    }
}

TEST_CASE("evaluate_dirs: empty or missing directories are errors") {
    TempDir td;
    CHECK_THROWS_AS(evaluate_dirs(td.dir("p"), td.dir("g")), DataError);
    CHECK_THROWS_AS(evaluate_dirs(td.file("nodir"), td.dir("g")), DataError);
}

TEST_CASE("reports: csv and text forms carry the numbers") {
    MetricReport r;
    r.mae = 0.125;
    r.weighted_f_beta = 0.5;
    r.f_beta = 0.75;
    r.s_measure = 0.625;
    r.n_images = 4;
    r.skipped_f = 1;
    const std::string csv = report_csv(r);
    CHECK(csv.rfind("mae,f_w_beta,f_beta,s_m,n_images,skipped_f\n", 0) == 0);
    CHECK(csv.find("0.125000,0.500000,0.750000,0.625000,4,1") != std::string::npos);
    const std::string text = report_text(r);
    CHECK(text.find("MAE") != std::string::npos);
    CHECK(text.find("0.1250") != std::string::npos);
}

// ---- published-number registry -------------------------------------------------------

TEST_CASE("registry: the shipped table loads and answers spot checks") {
    const auto rows = load_registry(std::string(DSAL_DATA_DIR) + "/benchmark_registry.csv");
    CHECK(rows.size() == 29);

    const RegistryRow* ours = registry_lookup(rows, "Ours", "after");
    REQUIRE(ours != nullptr);
    CHECK(ours->mae == 0.133);
    CHECK(ours->f_w_beta == 0.751);
    CHECK(ours->f_beta == 0.811);
    CHECK(ours->s_m == 0.785);
    CHECK_FALSE(ours->uses_crf);

    const RegistryRow* r3 = registry_lookup(rows, "R3Net", "after");
    REQUIRE(r3 != nullptr);
    CHECK(r3->uses_crf);
    CHECK(r3->mae == 0.140);

    const RegistryRow* base = registry_lookup(rows, "Baseline", "after");
    REQUIRE(base != nullptr);
    CHECK(base->mae == 0.149);
    CHECK(base->f_beta == 0.796);

    const RegistryRow* ucf = registry_lookup(rows, "UCF", "before");
    REQUIRE(ucf != nullptr);
    CHECK(ucf->mae == 0.428);

    CHECK(registry_lookup(rows, "Baseline", "before") == nullptr);
    CHECK(registry_lookup(rows, "NoSuchMethod", "after") == nullptr);

    // the fine-tuned variants never degrade both F measures relative to their
    // frozen counterparts
    for (const auto& row : rows) {
        if (row.phase != "before") continue;
        const RegistryRow* after = registry_lookup(rows, row.method, "after");
        REQUIRE(after != nullptr);
        CHECK(after->mae < row.mae);
        CHECK(after->f_beta > row.f_beta);
    }
}

TEST_CASE("registry: comparisons are report minus reference") {
    const auto rows = load_registry(std::string(DSAL_DATA_DIR) + "/benchmark_registry.csv");
    MetricReport rep;
    rep.mae = 0.143;
    rep.weighted_f_beta = 0.741;
    rep.f_beta = 0.801;
    rep.s_measure = 0.775;
    const RegistryDelta d = registry_compare(rep, rows, "Ours", "after");
    CHECK(d.reference.method == "Ours");
    CHECK(d.d_mae == doctest::Approx(0.010).epsilon(1e-9));
    CHECK(d.d_f_w_beta == doctest::Approx(-0.010).epsilon(1e-9));
    CHECK(d.d_f_beta == doctest::Approx(-0.010).epsilon(1e-9));
    CHECK(d.d_s_m == doctest::Approx(-0.010).epsilon(1e-9));
    CHECK_THROWS_AS(registry_compare(rep, rows, "NoSuchMethod", "after"), DataError);
}

TEST_CASE("registry: malformed tables are rejected") {
    TempDir td;
    auto bad = [&](const char* name, const std::string& text) {
        td.write_text(name, text);
        CHECK_THROWS_AS(load_registry(td.file(name)), DataError);
    };
    bad("h.csv", "method,phase,mae\nA,after,0.1\n");
    bad("f.csv", "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\nA,after,0.1,0.2,0.3\n");
    bad("n.csv", "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\nA,after,zero,0.2,0.3,0.4,0\n");
    bad("p.csv", "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\nA,during,0.1,0.2,0.3,0.4,0\n");
    bad("c.csv", "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\nA,after,0.1,0.2,0.3,0.4,2\n");
    bad("d.csv",
        "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\n"
        "A,after,0.1,0.2,0.3,0.4,0\n"
        "A,after,0.5,0.6,0.7,0.8,0\n");
    bad("e.csv", "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf\n");
    CHECK_THROWS_AS(load_registry(td.file("missing.csv")), DataError);
}
