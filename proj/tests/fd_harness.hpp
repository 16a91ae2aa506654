// Shared finite-difference gradient harness for the graph tests.
#ifndef DSAL_TEST_FD_HARNESS_HPP
#define DSAL_TEST_FD_HARNESS_HPP

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "dsal/autograd.hpp"
#include "dsal/common.hpp"

namespace fdh {

inline dsal::Tensor rand_tensor(dsal::Rng& rng, int n, int c, int h, int w, double lo = -1.0,
                                double hi = 1.0) {
    dsal::Tensor t(n, c, h, w);
    for (size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
    return t;
}

// Builds loss = sum(coef * f(inputs)) and checks d(loss)/d(input) against
// central differences for every element of every input.
inline void fd_check(std::vector<dsal::Tensor> inputs,
                     const std::function<dsal::Var(const std::vector<dsal::Var>&)>& build,
                     double tol = 1e-6, double eps = 1e-5) {
    using dsal::Tensor;
    using dsal::Var;
    auto eval = [&](const std::vector<Tensor>& vals, Tensor* coef_out) {
        std::vector<Var> vars;
        vars.reserve(vals.size());
        for (const auto& t : vals) vars.push_back(dsal::make_param(t, "p"));
        Var out = build(vars);
        if (coef_out && coef_out->empty()) {
            dsal::Rng crng(0xc0ef);
            *coef_out = rand_tensor(crng, out.n(), out.c(), out.h(), out.w(), 0.1, 1.0);
        }
        Var loss = dsal::sum_all(dsal::mul(out, dsal::make_input(*coef_out)));
        return std::pair<Var, std::vector<Var>>(loss, vars);
    };

    Tensor coef;
    auto [loss, vars] = eval(inputs, &coef);
    dsal::backward(loss);

    for (size_t vi = 0; vi < inputs.size(); ++vi) {
        const Tensor& g = vars[vi].grad();
        REQUIRE(!g.empty());
        for (size_t i = 0; i < inputs[vi].size(); ++i) {
            const double keep = inputs[vi][i];
            inputs[vi][i] = keep + eps;
            auto lp = eval(inputs, &coef).first.value().item();
            inputs[vi][i] = keep - eps;
            auto lm = eval(inputs, &coef).first.value().item();
            inputs[vi][i] = keep;
            const double fd = (lp - lm) / (2.0 * eps);
            const double rel =
                std::fabs(g[i] - fd) / std::max({std::fabs(g[i]), std::fabs(fd), 1e-6});
            if (rel >= tol) {
                CAPTURE(vi);
                CAPTURE(i);
                CAPTURE(g[i]);
                CAPTURE(fd);
            }
            CHECK(rel < tol);
        }
    }
}

}  // namespace fdh

#endif
