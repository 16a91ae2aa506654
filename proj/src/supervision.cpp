#include "dsal/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsal/image.hpp"

namespace dsal {

int boundary_band_width(int height) {
    return std::max(1, static_cast<int>(std::lround(2.0 * height / 256.0)));
}

GroundTruthTriple derive_boundary_interior(const Tensor& g0, int width) {
    if (g0.c() != 1) throw std::invalid_argument("derive_boundary_interior: expected (N,1,H,W)");
    if (width < 1) throw std::invalid_argument("derive_boundary_interior: width must be >= 1");
    GroundTruthTriple t;
    t.g0 = g0;
    t.gb = Tensor(g0.n(), 1, g0.h(), g0.w());
    t.gi = Tensor(g0.n(), 1, g0.h(), g0.w());
    const size_t plane = static_cast<size_t>(g0.h()) * g0.w();
    for (int n = 0; n < g0.n(); ++n) {
        Tensor m(1, 1, g0.h(), g0.w());
        std::copy_n(g0.data() + static_cast<size_t>(n) * plane, plane, m.data());
        Tensor d = dilate(m, width);
        Tensor e = erode(m, width);
        for (size_t i = 0; i < plane; ++i) {
            t.gb[static_cast<size_t>(n) * plane + i] = d[i] - e[i];
            t.gi[static_cast<size_t>(n) * plane + i] = e[i];
        }
    }
    return t;
}

double bce_loss(const Tensor& pred, const Tensor& gt) { return bce_mean_value(pred, gt); }

namespace {

GroundTruthTriple targets_for(const PredictionBundle& bundle, const Tensor& g0) {
    if (bundle.m0.size() != 5)
        throw std::invalid_argument("total_loss: bundle must carry 5 stages, got " +
                                    std::to_string(bundle.m0.size()));
    if (!bundle.mb.empty() && (bundle.mb.size() != 5 || bundle.mi.size() != 5))
        throw std::invalid_argument("total_loss: partial boundary/interior stage lists");
    return derive_boundary_interior(g0, boundary_band_width(g0.h()));
}

}  // namespace

Var total_loss(const PredictionBundle& bundle, const Tensor& g0) {
    GroundTruthTriple t = targets_for(bundle, g0);
    std::vector<Var> terms;
    for (size_t i = 0; i < 5; ++i) {
        terms.push_back(bce_mean(bundle.m0[i], t.g0));
        if (!bundle.mb.empty()) {
            terms.push_back(bce_mean(bundle.mb[i], t.gb));
            terms.push_back(bce_mean(bundle.mi[i], t.gi));
        }
    }
    return add_all(terms);
}

double total_loss_value(const PredictionBundle& bundle, const Tensor& g0) {
    GroundTruthTriple t = targets_for(bundle, g0);
    double acc = 0.0;
    for (size_t i = 0; i < 5; ++i) {
        acc += bce_mean_value(bundle.m0[i].value(), t.g0);
        if (!bundle.mb.empty()) {
            acc += bce_mean_value(bundle.mb[i].value(), t.gb);
            acc += bce_mean_value(bundle.mi[i].value(), t.gi);
        }
    }
    return acc;
}

}  // namespace dsal
