// Boundary/interior target derivation and the summed confidence-map loss.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsal/supervision.hpp"
#include "fd_harness.hpp"
#include "oracles.hpp"

using namespace dsal;
using fdh::rand_tensor;

namespace {

Tensor random_mask(Rng& rng, int h, int w, double p = 0.4) {
    Tensor m = Tensor::zeros(1, 1, h, w);
    for (size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < p ? 1.0 : 0.0;
    return m;
}

PredictionBundle constant_bundle(int n, int h, int w, double v, bool with_aux) {
    PredictionBundle b;
    for (int i = 0; i < 5; ++i) {
        b.m0.push_back(make_input(Tensor::full(n, 1, h, w, v)));
        if (with_aux) {
            b.mb.push_back(make_input(Tensor::full(n, 1, h, w, v)));
            b.mi.push_back(make_input(Tensor::full(n, 1, h, w, v)));
        }
    }
    return b;
}

}  // namespace

TEST_CASE("band width scales with image height") {
    CHECK(boundary_band_width(256) == 2);
    CHECK(boundary_band_width(512) == 4);
    CHECK(boundary_band_width(128) == 1);
    CHECK(boundary_band_width(64) == 1);   // floor of one pixel
    CHECK(boundary_band_width(32) == 1);
}

TEST_CASE("5x5 solid square, width 1: ring boundary and 3x3 interior") {
    Tensor g0 = Tensor::full(1, 1, 5, 5, 1.0);
    auto t = derive_boundary_interior(g0, 1);
    int ring = 0, inner = 0;
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            const bool border = y == 0 || y == 4 || x == 0 || x == 4;
            CHECK(t.gb.at(0, 0, y, x) == (border ? 1.0 : 0.0));
            CHECK(t.gi.at(0, 0, y, x) == (border ? 0.0 : 1.0));
            ring += border && t.gb.at(0, 0, y, x) == 1.0;
            inner += !border && t.gi.at(0, 0, y, x) == 1.0;
        }
    CHECK(ring == 16);
    CHECK(inner == 9);
    // the original mask is untouched in the triple
    for (size_t i = 0; i < g0.size(); ++i) CHECK(t.g0[i] == 1.0);
}

TEST_CASE("single pixel, width 1: all boundary, empty interior") {
    Tensor g0 = Tensor::zeros(1, 1, 7, 7);
    g0.at(0, 0, 3, 3) = 1.0;
    auto t = derive_boundary_interior(g0, 1);
    double bsum = 0.0, isum = 0.0;
    for (size_t i = 0; i < g0.size(); ++i) {
        bsum += t.gb[i];
        isum += t.gi[i];
    }
    CHECK(bsum == 9.0);  // the 3x3 dilation of the lone pixel
    CHECK(isum == 0.0);
}

TEST_CASE("random masks: band and interior partition the dilation") {
    Rng rng(41);
    for (int trial = 0; trial < 4; ++trial) {
        const int width = 1 + trial % 2;
        Tensor g0 = random_mask(rng, 9, 12);
        auto t = derive_boundary_interior(g0, width);
        for (size_t i = 0; i < g0.size(); ++i) {
            // binary outputs, disjoint by construction
            CHECK((t.gb[i] == 0.0 || t.gb[i] == 1.0));
            CHECK((t.gi[i] == 0.0 || t.gi[i] == 1.0));
            CHECK(t.gb[i] * t.gi[i] == 0.0);
            // interior sits inside the mask; mask sits inside band + interior
            CHECK(t.gi[i] <= g0[i]);
            CHECK(g0[i] <= t.gb[i] + t.gi[i]);
        }
    }
}

TEST_CASE("per-map loss: analytic midpoint and loop oracle") {
    Tensor half = Tensor::full(1, 1, 4, 4, 0.5);
    Tensor gt = Tensor::zeros(1, 1, 4, 4);
    gt.at(0, 0, 1, 1) = 1.0;
    CHECK(bce_loss(half, gt) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng(42);
    Tensor pred = rand_tensor(rng, 2, 1, 5, 6, 0.01, 0.99);
    Tensor g = random_mask(rng, 5, 6);
    Tensor g2(2, 1, 5, 6);
    for (int n = 0; n < 2; ++n)
        for (size_t i = 0; i < g.size(); ++i) g2[n * g.size() + i] = g[i];
    CHECK(bce_loss(pred, g2) == doctest::Approx(oracle::bce(pred, g2)).epsilon(1e-12));

    // clamped at the extremes: finite even for saturated predictions
    Tensor sat = Tensor::zeros(1, 1, 2, 2);
    sat[0] = 0.0;
    sat[1] = 1.0;
    sat[2] = 1e-12;
    sat[3] = 1.0 - 1e-12;
    CHECK(std::isfinite(bce_loss(sat, Tensor::zeros(1, 1, 2, 2))));
}

TEST_CASE("bundle loss at the 0.5 midpoint: 15 ln 2 full, 5 ln 2 ablated") {
    Rng rng(43);
    Tensor g0 = random_mask(rng, 8, 8);
    PredictionBundle full = constant_bundle(1, 8, 8, 0.5, true);
    PredictionBundle plain = constant_bundle(1, 8, 8, 0.5, false);
    CHECK(total_loss_value(full, g0) == doctest::Approx(15.0 * std::log(2.0)).epsilon(1e-6));
    CHECK(total_loss_value(plain, g0) == doctest::Approx(5.0 * std::log(2.0)).epsilon(1e-6));

    // graph evaluation agrees with the value path
    Var lf = total_loss(full, g0);
    Var lp = total_loss(plain, g0);
    CHECK(lf.value().item() == doctest::Approx(total_loss_value(full, g0)).epsilon(1e-12));
    CHECK(lp.value().item() == doctest::Approx(total_loss_value(plain, g0)).epsilon(1e-12));
}

TEST_CASE("bundle loss: graph and value paths agree on random bundles") {
    Rng rng(44);
    Tensor g0 = random_mask(rng, 6, 10);
    PredictionBundle b;
    for (int i = 0; i < 5; ++i) {
        b.m0.push_back(make_input(rand_tensor(rng, 1, 1, 6, 10, 0.05, 0.95)));
        b.mb.push_back(make_input(rand_tensor(rng, 1, 1, 6, 10, 0.05, 0.95)));
        b.mi.push_back(make_input(rand_tensor(rng, 1, 1, 6, 10, 0.05, 0.95)));
    }
    CHECK(total_loss(b, g0).value().item() ==
          doctest::Approx(total_loss_value(b, g0)).epsilon(1e-12));
}

TEST_CASE("bundle loss: wrong stage counts rejected") {
    Rng rng(45);
    Tensor g0 = random_mask(rng, 4, 4);
    PredictionBundle four = constant_bundle(1, 4, 4, 0.5, true);
    four.m0.pop_back();
    four.mb.pop_back();
    four.mi.pop_back();
    CHECK_THROWS(total_loss_value(four, g0));

    // partially populated auxiliary lists are invalid too
    PredictionBundle partial = constant_bundle(1, 4, 4, 0.5, true);
    partial.mb.pop_back();
    CHECK_THROWS(total_loss_value(partial, g0));
}
