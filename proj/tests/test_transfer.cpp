// Attention map distributions and the residual knowledge-transfer unit.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "dsal/knowledge_transfer.hpp"
#include "fd_harness.hpp"
#include "oracles.hpp"

using namespace dsal;
using fdh::rand_tensor;

TEST_CASE("spatial softmax: uniform, spike, oracle") {
    Tensor flat = Tensor::full(1, 1, 2, 2, 3.7);
    Tensor out = spatial_softmax_value(flat);
    for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(0.25).epsilon(1e-12));

    Tensor spike(1, 2, 3, 3);
    spike.at(0, 0, 1, 2) = 50.0;
    spike.at(0, 1, 0, 0) = 50.0;
    out = spatial_softmax_value(spike);
    CHECK(out.at(0, 0, 1, 2) > 0.999);
    CHECK(out.at(0, 1, 0, 0) > 0.999);

    Rng rng(11);
    Tensor f = rand_tensor(rng, 2, 2, 3, 4, -2.0, 2.0);
    out = spatial_softmax_value(f);
    Tensor ref = oracle::spatial_softmax(f);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 2; ++c) {
            double s = 0.0;
            for (int y = 0; y < 3; ++y)
                for (int x = 0; x < 4; ++x) {
                    s += out.at(n, c, y, x);
                    CHECK(out.at(n, c, y, x) ==
                          doctest::Approx(ref.at(n, c, y, x)).epsilon(1e-9));
                }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        }
}

TEST_CASE("spatial softmax: order preserved and permutation equivariant") {
    Rng rng(12);
    Tensor f = rand_tensor(rng, 1, 1, 4, 4, -3.0, 3.0);
    Tensor out = spatial_softmax_value(f);
    // monotone map: input ordering survives
    for (size_t i = 0; i + 1 < f.size(); ++i)
        for (size_t j = i + 1; j < f.size(); ++j)
            CHECK((f[i] < f[j]) == (out[i] < out[j]));

    // reverse the pixels; outputs must reverse identically
    Tensor rev(1, 1, 4, 4);
    for (size_t i = 0; i < f.size(); ++i) rev[i] = f[f.size() - 1 - i];
    Tensor out_rev = spatial_softmax_value(rev);
    for (size_t i = 0; i < f.size(); ++i) CHECK(out_rev[i] == out[f.size() - 1 - i]);
}

TEST_CASE("channel softmax of pooled means: symmetry, dominance, oracle") {
    // equal spatial means across channels -> uniform weights
    Tensor f(1, 4, 2, 3);
    for (int c = 0; c < 4; ++c) {
        // different layouts, same mean
        f.at(0, c, 0, 0) = 1.0 + c;
        f.at(0, c, 1, 2) = 1.0 - c;
    }
    Tensor w = channel_softmax_gap_value(f);
    for (int c = 0; c < 4; ++c) CHECK(w.at(0, c, 0, 0) == doctest::Approx(0.25).epsilon(1e-12));

    Tensor dom = Tensor::zeros(1, 3, 2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) dom.at(0, 1, y, x) = 40.0;
    w = channel_softmax_gap_value(dom);
    CHECK(w.at(0, 1, 0, 0) > 0.999);

    Rng rng(13);
    Tensor r = rand_tensor(rng, 2, 3, 5, 5, -2.0, 2.0);
    w = channel_softmax_gap_value(r);
    Tensor ref = oracle::channel_softmax_gap(r);
    for (int n = 0; n < 2; ++n) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
            s += w.at(n, c, 0, 0);
            CHECK(w.at(n, c, 0, 0) == doctest::Approx(ref.at(n, c, 0, 0)).epsilon(1e-9));
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("attention map: uniform value, global sum, loop oracle, graph parity") {
    Tensor flat = Tensor::full(1, 4, 2, 2, -1.3);
    Tensor a = attention_map_value(flat);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == doctest::Approx(1.0 / 16.0).epsilon(1e-12));

    Rng rng(14);
    Tensor f = rand_tensor(rng, 2, 2, 4, 4, -2.0, 2.0);
    a = attention_map_value(f);
    Tensor ref = oracle::attention(f);
    for (int n = 0; n < 2; ++n) {
        double s = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x) {
                    CHECK(a.at(n, c, y, x) >= 0.0);
                    CHECK(a.at(n, c, y, x) ==
                          doctest::Approx(ref.at(n, c, y, x)).epsilon(1e-6));
                    s += a.at(n, c, y, x);
                }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }

    // graph node agrees with the value path
    Var ag = attention_map(make_input(f));
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(ag.value()[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

namespace {

// write fresh values into a named parameter
void set_param(ParamStore& ps, const std::string& name, Rng& rng, double lo, double hi) {
    Tensor& v = ps.at(name).value();
    for (size_t i = 0; i < v.size(); ++i) v[i] = lo + (hi - lo) * rng.uniform();
}

}  // namespace

TEST_CASE("transfer unit: fresh unit is an exact identity") {
    ParamStore ps(77);
    auto unit = make_transfer_unit(ps, "t", 3);
    Rng rng(15);
    Tensor fg = rand_tensor(rng, 2, 3, 4, 5);
    Tensor fs = rand_tensor(rng, 2, 3, 4, 5);
    Var out = unit(make_input(fg), make_input(fs));
    for (size_t i = 0; i < fs.size(); ++i) CHECK(out.value()[i] == fs[i]);
}

TEST_CASE("transfer unit: zero general features and zero biases leave task features") {
    ParamStore ps(78);
    auto unit = make_transfer_unit(ps, "t", 3);
    Rng rng(16);
    set_param(ps, "t/proj/w", rng, -1.0, 1.0);
    set_param(ps, "t/out/w", rng, -1.0, 1.0);  // biases stay zero
    Tensor fs = rand_tensor(rng, 1, 3, 4, 4);
    Var out = unit(make_input(Tensor::zeros(1, 3, 4, 4)), make_input(fs));
    for (size_t i = 0; i < fs.size(); ++i) CHECK(out.value()[i] == fs[i]);
}

TEST_CASE("transfer unit: learned shift depends only on general features") {
    ParamStore ps(79);
    auto unit = make_transfer_unit(ps, "t", 2);
    Rng rng(17);
    set_param(ps, "t/proj/w", rng, -1.0, 1.0);
    set_param(ps, "t/proj/b", rng, -0.5, 0.5);
    set_param(ps, "t/out/w", rng, -1.0, 1.0);
    set_param(ps, "t/out/b", rng, -0.5, 0.5);

    Tensor fg = rand_tensor(rng, 1, 2, 5, 6);
    Tensor fs1 = rand_tensor(rng, 1, 2, 5, 6);
    Tensor fs2 = rand_tensor(rng, 1, 2, 5, 6);

    // the shift itself, read off with zero task features
    Tensor shift = unit(make_input(fg), make_input(Tensor::zeros(1, 2, 5, 6))).value();
    Tensor t1 = unit(make_input(fg), make_input(fs1)).value();
    Tensor t2 = unit(make_input(fg), make_input(fs2)).value();
    for (size_t i = 0; i < shift.size(); ++i) {
        CHECK(t1[i] == fs1[i] + shift[i]);
        CHECK(t2[i] == fs2[i] + shift[i]);
        // difference form of the same statement
        CHECK((t1[i] - t2[i]) == doctest::Approx(fs1[i] - fs2[i]).epsilon(1e-12));
    }
}

TEST_CASE("transfer unit: shape mismatch rejected") {
    ParamStore ps(80);
    auto unit = make_transfer_unit(ps, "t", 2);
    Var fg = make_input(Tensor::zeros(1, 2, 4, 4));
    Var fs = make_input(Tensor::zeros(1, 2, 4, 5));
    CHECK_THROWS(unit(fg, fs));
}

TEST_CASE("transfer unit: gradients match finite differences") {
    ParamStore ps(81);
    auto unit = make_transfer_unit(ps, "t", 2);
    Rng rng(18);
    set_param(ps, "t/proj/w", rng, -0.8, 0.8);
    set_param(ps, "t/proj/b", rng, -0.3, 0.3);
    set_param(ps, "t/out/w", rng, -0.5, 0.5);
    set_param(ps, "t/out/b", rng, -0.3, 0.3);
    Tensor fg = rand_tensor(rng, 1, 2, 4, 4);
    Tensor fs = rand_tensor(rng, 1, 2, 4, 4);
    Tensor coef = rand_tensor(rng, 1, 2, 4, 4, 0.1, 1.0);

    auto loss = [&] {
        Var out = unit(make_input(fg), make_input(fs));
        return sum_all(mul(out, make_input(coef)));
    };
    ps.zero_grad_all();
    backward(loss());
    const double eps = 1e-5;
    for (const char* name : {"t/proj/w", "t/proj/b", "t/out/w", "t/out/b"}) {
        Var p = ps.at(name);
        const Tensor g = p.grad();
        REQUIRE(!g.empty());
        for (size_t i = 0; i < g.size(); ++i) {
            const double keep = p.value()[i];
            p.value()[i] = keep + eps;
            const double lp = loss().value().item();
            p.value()[i] = keep - eps;
            const double lm = loss().value().item();
            p.value()[i] = keep;
            const double fd = (lp - lm) / (2.0 * eps);
            const double rel =
                std::fabs(g[i] - fd) / std::max({std::fabs(g[i]), std::fabs(fd), 1e-6});
            CAPTURE(name);
            CAPTURE(i);
            CHECK(rel < 1e-3);
        }
    }
}
