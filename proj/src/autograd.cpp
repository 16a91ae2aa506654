#include "dsal/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace dsal {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

NodePtr new_node(Tensor value, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    return n;
}

int conv_out(int in, int k, int stride, int pad, int dil) {
    return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

// col layout: K x (OH*OW) row-major with K = Cin*kh*kw, matching the
// (Cout, Cin*kh*kw) weight matrix view.
void im2col(const double* src, int C, int H, int W, int kh, int kw, int stride, int pad,
            int dil, int OH, int OW, double* col) {
    const int ohw = OH * OW;
    for (int ci = 0; ci < C; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                double* row = col + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * ohw;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + ky * dil;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < OW; ++ox) row[oy * OW + ox] = 0.0;
                        continue;
                    }
                    const double* srow = src + (static_cast<size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + kx * dil;
                        row[oy * OW + ox] = (ix < 0 || ix >= W) ? 0.0 : srow[ix];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                int dil, int OH, int OW, double* dst) {
    const int ohw = OH * OW;
    for (int ci = 0; ci < C; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const double* row = col + (static_cast<size_t>(ci) * kh * kw + ky * kw + kx) * ohw;
                for (int oy = 0; oy < OH; ++oy) {
                    const int iy = oy * stride - pad + ky * dil;
                    if (iy < 0 || iy >= H) continue;
                    double* drow = dst + (static_cast<size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < OW; ++ox) {
                        const int ix = ox * stride - pad + kx * dil;
                        if (ix >= 0 && ix < W) drow[ix] += row[oy * OW + ox];
                    }
                }
            }
        }
    }
}

struct ConvDims {
    int cin, cout, kh, kw, stride, pad, dil;
};

// y[n] = W * col(x[n]); per-image GEMM keeps batch members bit-independent
void conv_fwd(const Tensor& x, const Tensor& w, const Tensor* bias, const ConvDims& d,
              Tensor& y) {
    const int K = d.cin * d.kh * d.kw;
    const int OH = y.h(), OW = y.w(), ohw = OH * OW;
    std::vector<double> col(static_cast<size_t>(K) * ohw);
    MapCM W(w.data(), d.cout, K);
    for (int n = 0; n < x.n(); ++n) {
        im2col(x.data() + static_cast<size_t>(n) * d.cin * x.h() * x.w(), d.cin, x.h(), x.w(),
               d.kh, d.kw, d.stride, d.pad, d.dil, OH, OW, col.data());
        MapCM C(col.data(), K, ohw);
        MapM Y(y.data() + static_cast<size_t>(n) * d.cout * ohw, d.cout, ohw);
        Y.noalias() = W * C;
        if (bias) {
            for (int co = 0; co < d.cout; ++co) {
                const double b = (*bias)[static_cast<size_t>(co)];
                double* row = y.data() + (static_cast<size_t>(n) * d.cout + co) * ohw;
                for (int i = 0; i < ohw; ++i) row[i] += b;
            }
        }
    }
}

// dx[n] += col2im(W^T * dy[n])
void conv_bwd_data(const Tensor& dy, const Tensor& w, const ConvDims& d, int H, int W_,
                   Tensor& dx) {
    const int K = d.cin * d.kh * d.kw;
    const int OH = dy.h(), OW = dy.w(), ohw = OH * OW;
    std::vector<double> colg(static_cast<size_t>(K) * ohw);
    MapCM Wm(w.data(), d.cout, K);
    for (int n = 0; n < dy.n(); ++n) {
        MapCM DY(dy.data() + static_cast<size_t>(n) * d.cout * ohw, d.cout, ohw);
        MapM CG(colg.data(), K, ohw);
        CG.noalias() = Wm.transpose() * DY;
        col2im_add(colg.data(), d.cin, H, W_, d.kh, d.kw, d.stride, d.pad, d.dil, OH, OW,
                   dx.data() + static_cast<size_t>(n) * d.cin * H * W_);
    }
}

// dw += sum_n dy[n] * col(x[n])^T
void conv_bwd_weight(const Tensor& x, const Tensor& dy, const ConvDims& d, Tensor& dw) {
    const int K = d.cin * d.kh * d.kw;
    const int OH = dy.h(), OW = dy.w(), ohw = OH * OW;
    std::vector<double> col(static_cast<size_t>(K) * ohw);
    MapM DW(dw.data(), d.cout, K);
    for (int n = 0; n < x.n(); ++n) {
        im2col(x.data() + static_cast<size_t>(n) * d.cin * x.h() * x.w(), d.cin, x.h(), x.w(),
               d.kh, d.kw, d.stride, d.pad, d.dil, OH, OW, col.data());
        MapCM C(col.data(), K, ohw);
        MapCM DY(dy.data() + static_cast<size_t>(n) * d.cout * ohw, d.cout, ohw);
        DW.noalias() += DY * C.transpose();
    }
}

void conv_bwd_bias(const Tensor& dy, Tensor& db) {
    const int ohw = dy.h() * dy.w();
    for (int n = 0; n < dy.n(); ++n)
        for (int co = 0; co < dy.c(); ++co) {
            const double* row = dy.data() + (static_cast<size_t>(n) * dy.c() + co) * ohw;
            double s = 0.0;
            for (int i = 0; i < ohw; ++i) s += row[i];
            db[static_cast<size_t>(co)] += s;
        }
}

struct LerpWeights {
    // per output coordinate: two source indices and their weights
    std::vector<int> i0, i1;
    std::vector<double> w0, w1;
};

// half-pixel-center bilinear mapping
LerpWeights lerp_axis(int in, int out) {
    LerpWeights lw;
    lw.i0.resize(out);
    lw.i1.resize(out);
    lw.w0.resize(out);
    lw.w1.resize(out);
    const double s = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * s - 0.5;
        if (src < 0) src = 0;
        if (src > in - 1) src = in - 1;
        int i0 = static_cast<int>(std::floor(src));
        int i1 = std::min(i0 + 1, in - 1);
        double f = src - i0;
        lw.i0[o] = i0;
        lw.i1[o] = i1;
        lw.w0[o] = 1.0 - f;
        lw.w1[o] = f;
    }
    return lw;
}

}  // namespace

Var make_input(Tensor v) { return Var(new_node(std::move(v), {})); }

Var make_param(Tensor v, const std::string& name) {
    auto n = new_node(std::move(v), {});
    n->requires_grad = true;
    n->name = name;
    return Var(n);
}

void backward(const Var& root) {
    if (root.value().size() != 1) throw std::logic_error("backward: root must be scalar");
    // iterative topo sort
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->grad_buf().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_op && !n->grad.empty()) n->backward_op(*n);
    }
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const auto& bv = b.value().vec();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    auto n = new_node(std::move(out), {a.node(), b.node()});
    n->backward_op = [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Node* p = self.parents[k].get();
            if (!p->requires_grad) continue;
            auto& g = p->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    };
    return Var(n);
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const auto& bv = b.value().vec();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    auto n = new_node(std::move(out), {a.node(), b.node()});
    n->backward_op = [](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        if (pa->requires_grad) {
            auto& g = pa->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    };
    return Var(n);
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const auto& bv = b.value().vec();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    auto n = new_node(std::move(out), {a.node(), b.node()});
    n->backward_op = [](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        if (pa->requires_grad) {
            auto& g = pa->grad_buf();
            const auto& other = pb->value.vec();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buf();
            const auto& other = pa->value.vec();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
        }
    };
    return Var(n);
}

Var scale(const Var& a, double k) {
    Tensor out = a.value();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= k;
    auto n = new_node(std::move(out), {a.node()});
    n->backward_op = [k](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        for (size_t i = 0; i < g.size(); ++i) g[i] += k * self.grad[i];
    };
    return Var(n);
}

Var add_channel_bias(const Var& x, const Var& b) {
    const Tensor& xv = x.value();
    const Tensor& bv = b.value();
    if (bv.n() != 1 || bv.c() != xv.c() || bv.h() != 1 || bv.w() != 1)
        throw std::invalid_argument("add_channel_bias: bias must be (1,C,1,1)");
    Tensor out = xv;
    const int hw = xv.h() * xv.w();
    for (int n = 0; n < xv.n(); ++n)
        for (int c = 0; c < xv.c(); ++c) {
            double bb = bv[static_cast<size_t>(c)];
            double* row = out.data() + (static_cast<size_t>(n) * xv.c() + c) * hw;
            for (int i = 0; i < hw; ++i) row[i] += bb;
        }
    auto n = new_node(std::move(out), {x.node(), b.node()});
    n->backward_op = [](Node& self) {
        Node* px = self.parents[0].get();
        Node* pb = self.parents[1].get();
        const Tensor& dy = self.grad;
        if (px->requires_grad) {
            auto& g = px->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buf();
            const int hw = dy.h() * dy.w();
            for (int n2 = 0; n2 < dy.n(); ++n2)
                for (int c = 0; c < dy.c(); ++c) {
                    const double* row = dy.data() + (static_cast<size_t>(n2) * dy.c() + c) * hw;
                    double s = 0.0;
                    for (int i = 0; i < hw; ++i) s += row[i];
                    g[static_cast<size_t>(c)] += s;
                }
        }
    };
    return Var(n);
}

Var mul_spatial_gate(const Var& x, const Var& gate) {
    const Tensor& xv = x.value();
    const Tensor& gv = gate.value();
    if (gv.n() != xv.n() || gv.c() != 1 || gv.h() != xv.h() || gv.w() != xv.w())
        throw std::invalid_argument("mul_spatial_gate: gate must be (N,1,H,W)");
    Tensor out = xv;
    const int hw = xv.h() * xv.w();
    for (int n = 0; n < xv.n(); ++n) {
        const double* grow = gv.data() + static_cast<size_t>(n) * hw;
        for (int c = 0; c < xv.c(); ++c) {
            double* row = out.data() + (static_cast<size_t>(n) * xv.c() + c) * hw;
            for (int i = 0; i < hw; ++i) row[i] *= grow[i];
        }
    }
    auto n = new_node(std::move(out), {x.node(), gate.node()});
    n->backward_op = [](Node& self) {
        Node* px = self.parents[0].get();
        Node* pg = self.parents[1].get();
        const Tensor& dy = self.grad;
        const Tensor& xv = px->value;
        const Tensor& gv = pg->value;
        const int hw = xv.h() * xv.w();
        if (px->requires_grad) {
            auto& g = px->grad_buf();
            for (int n2 = 0; n2 < xv.n(); ++n2) {
                const double* grow = gv.data() + static_cast<size_t>(n2) * hw;
                for (int c = 0; c < xv.c(); ++c) {
                    const size_t off = (static_cast<size_t>(n2) * xv.c() + c) * hw;
                    for (int i = 0; i < hw; ++i) g[off + i] += dy[off + i] * grow[i];
                }
            }
        }
        if (pg->requires_grad) {
            auto& g = pg->grad_buf();
            for (int n2 = 0; n2 < xv.n(); ++n2) {
                double* grow = g.data() + static_cast<size_t>(n2) * hw;
                for (int c = 0; c < xv.c(); ++c) {
                    const size_t off = (static_cast<size_t>(n2) * xv.c() + c) * hw;
                    for (int i = 0; i < hw; ++i) grow[i] += dy[off + i] * xv[off + i];
                }
            }
        }
    };
    return Var(n);
}

Var mul_channel_weight(const Var& x, const Var& wgt) {
    const Tensor& xv = x.value();
    const Tensor& wv = wgt.value();
    if (wv.n() != xv.n() || wv.c() != xv.c() || wv.h() != 1 || wv.w() != 1)
        throw std::invalid_argument("mul_channel_weight: weight must be (N,C,1,1)");
    Tensor out = xv;
    const int hw = xv.h() * xv.w();
    for (int n = 0; n < xv.n(); ++n)
        for (int c = 0; c < xv.c(); ++c) {
            const double k = wv[static_cast<size_t>(n) * xv.c() + c];
            double* row = out.data() + (static_cast<size_t>(n) * xv.c() + c) * hw;
            for (int i = 0; i < hw; ++i) row[i] *= k;
        }
    auto n = new_node(std::move(out), {x.node(), wgt.node()});
    n->backward_op = [](Node& self) {
        Node* px = self.parents[0].get();
        Node* pw = self.parents[1].get();
        const Tensor& dy = self.grad;
        const Tensor& xv = px->value;
        const Tensor& wv = pw->value;
        const int hw = xv.h() * xv.w();
        if (px->requires_grad) {
            auto& g = px->grad_buf();
            for (int n2 = 0; n2 < xv.n(); ++n2)
                for (int c = 0; c < xv.c(); ++c) {
                    const double k = wv[static_cast<size_t>(n2) * xv.c() + c];
                    const size_t off = (static_cast<size_t>(n2) * xv.c() + c) * hw;
                    for (int i = 0; i < hw; ++i) g[off + i] += dy[off + i] * k;
                }
        }
        if (pw->requires_grad) {
            auto& g = pw->grad_buf();
            for (int n2 = 0; n2 < xv.n(); ++n2)
                for (int c = 0; c < xv.c(); ++c) {
                    const size_t off = (static_cast<size_t>(n2) * xv.c() + c) * hw;
                    double s = 0.0;
                    for (int i = 0; i < hw; ++i) s += dy[off + i] * xv[off + i];
                    g[static_cast<size_t>(n2) * xv.c() + c] += s;
                }
        }
    };
    return Var(n);
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int dilation) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (wv.c() != xv.c())
        throw std::invalid_argument("conv2d: weight in-channels " + std::to_string(wv.c()) +
                                    " != input channels " + std::to_string(xv.c()));
    ConvDims d{wv.c(), wv.n(), wv.h(), wv.w(), stride, pad, dilation};
    const int OH = conv_out(xv.h(), d.kh, stride, pad, dilation);
    const int OW = conv_out(xv.w(), d.kw, stride, pad, dilation);
    if (OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv2d: input " + xv.shape_str() + " too small for kernel");
    Tensor out(xv.n(), d.cout, OH, OW);
    conv_fwd(xv, wv, b.defined() ? &b.value() : nullptr, d, out);

    std::vector<NodePtr> parents{x.node(), w.node()};
    if (b.defined()) parents.push_back(b.node());
    auto n = new_node(std::move(out), std::move(parents));
    n->backward_op = [d](Node& self) {
        Node* px = self.parents[0].get();
        Node* pw = self.parents[1].get();
        const Tensor& dy = self.grad;
        if (px->requires_grad)
            conv_bwd_data(dy, pw->value, d, px->value.h(), px->value.w(), px->grad_buf());
        if (pw->requires_grad) conv_bwd_weight(px->value, dy, d, pw->grad_buf());
        if (self.parents.size() > 2 && self.parents[2]->requires_grad)
            conv_bwd_bias(dy, self.parents[2]->grad_buf());
    };
    return Var(n);
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();  // (Cin, Cout, kh, kw)
    if (wv.n() != xv.c())
        throw std::invalid_argument("conv_transpose2d: weight in-channels mismatch");
    // the transpose of a conv whose input is our output
    ConvDims d{wv.c(), wv.n(), wv.h(), wv.w(), stride, pad, 1};
    const int OH = (xv.h() - 1) * stride - 2 * pad + d.kh;
    const int OW = (xv.w() - 1) * stride - 2 * pad + d.kw;
    if (OH <= 0 || OW <= 0) throw std::invalid_argument("conv_transpose2d: degenerate output");
    Tensor out(xv.n(), d.cin, OH, OW);
    conv_bwd_data(xv, wv, d, OH, OW, out);
    if (b.defined()) {
        const Tensor& bv = b.value();
        const int hw = OH * OW;
        for (int n = 0; n < out.n(); ++n)
            for (int c = 0; c < out.c(); ++c) {
                const double bb = bv[static_cast<size_t>(c)];
                double* row = out.data() + (static_cast<size_t>(n) * out.c() + c) * hw;
                for (int i = 0; i < hw; ++i) row[i] += bb;
            }
    }
    std::vector<NodePtr> parents{x.node(), w.node()};
    if (b.defined()) parents.push_back(b.node());
    auto n = new_node(std::move(out), std::move(parents));
    n->backward_op = [d](Node& self) {
        Node* px = self.parents[0].get();
        Node* pw = self.parents[1].get();
        const Tensor& dy = self.grad;
        if (px->requires_grad) {
            Tensor dx(px->value.n(), d.cout, px->value.h(), px->value.w());
            conv_fwd(dy, pw->value, nullptr, d, dx);
            auto& g = px->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += dx[i];
        }
        if (pw->requires_grad) conv_bwd_weight(dy, px->value, d, pw->grad_buf());
        if (self.parents.size() > 2 && self.parents[2]->requires_grad)
            conv_bwd_bias(dy, self.parents[2]->grad_buf());
    };
    return Var(n);
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
    const Tensor& xv = x.value();
    if (xv.c() % groups != 0)
        throw std::invalid_argument("group_norm: channels not divisible by groups");
    const int cpg = xv.c() / groups;
    const int hw = xv.h() * xv.w();
    const size_t m = static_cast<size_t>(cpg) * hw;

    Tensor out(xv.n(), xv.c(), xv.h(), xv.w());
    // keep normalized values and inverse stddev for the backward pass
    auto xhat = std::make_shared<Tensor>(xv.n(), xv.c(), xv.h(), xv.w());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(xv.n()) * groups);

    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (int n = 0; n < xv.n(); ++n) {
        for (int g = 0; g < groups; ++g) {
            const size_t base = (static_cast<size_t>(n) * xv.c() + static_cast<size_t>(g) * cpg) * hw;
            double mean = 0.0;
            for (size_t i = 0; i < m; ++i) mean += xv[base + i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (size_t i = 0; i < m; ++i) {
                const double dxx = xv[base + i] - mean;
                var += dxx * dxx;
            }
            var /= static_cast<double>(m);
            const double is = 1.0 / std::sqrt(var + eps);
            (*inv_std)[static_cast<size_t>(n) * groups + g] = is;
            for (int cc = 0; cc < cpg; ++cc) {
                const int c = g * cpg + cc;
                const double ga = gv[static_cast<size_t>(c)];
                const double be = bv[static_cast<size_t>(c)];
                const size_t o = (static_cast<size_t>(n) * xv.c() + c) * hw;
                for (int i = 0; i < hw; ++i) {
                    const double xh = (xv[o + i] - mean) * is;
                    (*xhat)[o + i] = xh;
                    out[o + i] = ga * xh + be;
                }
            }
        }
    }
    auto n = new_node(std::move(out), {x.node(), gamma.node(), beta.node()});
    n->backward_op = [groups, cpg, hw, m, xhat, inv_std](Node& self) {
        Node* px = self.parents[0].get();
        Node* pg = self.parents[1].get();
        Node* pb = self.parents[2].get();
        const Tensor& dy = self.grad;
        const int C = px->value.c();
        if (pg->requires_grad || pb->requires_grad) {
            auto& dgam = pg->grad_buf();
            auto& dbet = pb->grad_buf();
            for (int n2 = 0; n2 < dy.n(); ++n2)
                for (int c = 0; c < C; ++c) {
                    const size_t o = (static_cast<size_t>(n2) * C + c) * hw;
                    double sg = 0.0, sb = 0.0;
                    for (int i = 0; i < hw; ++i) {
                        sg += dy[o + i] * (*xhat)[o + i];
                        sb += dy[o + i];
                    }
                    if (pg->requires_grad) dgam[static_cast<size_t>(c)] += sg;
                    if (pb->requires_grad) dbet[static_cast<size_t>(c)] += sb;
                }
        }
        if (px->requires_grad) {
            auto& dx = px->grad_buf();
            const Tensor& gv = pg->value;
            for (int n2 = 0; n2 < dy.n(); ++n2)
                for (int g = 0; g < groups; ++g) {
                    const size_t base =
                        (static_cast<size_t>(n2) * C + static_cast<size_t>(g) * cpg) * hw;
                    // t = gamma_c * dy ; dx = (t - mean(t) - xhat*mean(t*xhat)) * inv_std
                    double mean_t = 0.0, mean_tx = 0.0;
                    for (int cc = 0; cc < cpg; ++cc) {
                        const double ga = gv[static_cast<size_t>(g) * cpg + cc];
                        const size_t o = base + static_cast<size_t>(cc) * hw;
                        for (int i = 0; i < hw; ++i) {
                            const double t = ga * dy[o + i];
                            mean_t += t;
                            mean_tx += t * (*xhat)[o + i];
                        }
                    }
                    mean_t /= static_cast<double>(m);
                    mean_tx /= static_cast<double>(m);
                    const double is = (*inv_std)[static_cast<size_t>(n2) * groups + g];
                    for (int cc = 0; cc < cpg; ++cc) {
                        const double ga = gv[static_cast<size_t>(g) * cpg + cc];
                        const size_t o = base + static_cast<size_t>(cc) * hw;
                        for (int i = 0; i < hw; ++i) {
                            const double t = ga * dy[o + i];
                            dx[o + i] += (t - mean_t - (*xhat)[o + i] * mean_tx) * is;
                        }
                    }
                }
        }
    };
    return Var(n);
}

Var frozen_norm(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                const Tensor& var, double eps) {
    const Tensor& xv = x.value();
    const int C = xv.c(), hw = xv.h() * xv.w();
    auto scale_c = std::make_shared<std::vector<double>>(C);
    Tensor out(xv.n(), C, xv.h(), xv.w());
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (int c = 0; c < C; ++c)
        (*scale_c)[c] = gv[static_cast<size_t>(c)] / std::sqrt(var[static_cast<size_t>(c)] + eps);
    for (int n = 0; n < xv.n(); ++n)
        for (int c = 0; c < C; ++c) {
            const double k = (*scale_c)[c];
            const double off = bv[static_cast<size_t>(c)] - mean[static_cast<size_t>(c)] * k;
            const size_t o = (static_cast<size_t>(n) * C + c) * hw;
            for (int i = 0; i < hw; ++i) out[o + i] = xv[o + i] * k + off;
        }
    auto mu = std::make_shared<Tensor>(mean);
    auto vr = std::make_shared<Tensor>(var);
    auto n = new_node(std::move(out), {x.node(), gamma.node(), beta.node()});
    n->backward_op = [scale_c, mu, vr, eps, hw](Node& self) {
        Node* px = self.parents[0].get();
        Node* pg = self.parents[1].get();
        Node* pb = self.parents[2].get();
        const Tensor& dy = self.grad;
        const Tensor& xv = px->value;
        const int C = xv.c();
        for (int c = 0; c < C; ++c) {
            const double is = 1.0 / std::sqrt((*vr)[static_cast<size_t>(c)] + eps);
            double sg = 0.0, sb = 0.0;
            for (int n2 = 0; n2 < xv.n(); ++n2) {
                const size_t o = (static_cast<size_t>(n2) * C + c) * hw;
                for (int i = 0; i < hw; ++i) {
                    sb += dy[o + i];
                    sg += dy[o + i] * (xv[o + i] - (*mu)[static_cast<size_t>(c)]) * is;
                }
            }
            if (pg->requires_grad) pg->grad_buf()[static_cast<size_t>(c)] += sg;
            if (pb->requires_grad) pb->grad_buf()[static_cast<size_t>(c)] += sb;
        }
        if (px->requires_grad) {
            auto& dx = px->grad_buf();
            for (int n2 = 0; n2 < xv.n(); ++n2)
                for (int c = 0; c < C; ++c) {
                    const double k = (*scale_c)[c];
                    const size_t o = (static_cast<size_t>(n2) * C + c) * hw;
                    for (int i = 0; i < hw; ++i) dx[o + i] += dy[o + i] * k;
                }
        }
    };
    return Var(n);
}

Var elu(const Var& x) {
    Tensor out = x.value();
    for (size_t i = 0; i < out.size(); ++i)
        if (out[i] < 0.0) out[i] = std::expm1(out[i]);
    auto n = new_node(std::move(out), {x.node()});
    n->backward_op = [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const Tensor& y = self.value;
        for (size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * (y[i] >= 0.0 ? 1.0 : y[i] + 1.0);
    };
    return Var(n);
}

Var sigmoid(const Var& x) {
    // clamped into the open interval: the exact function never reaches 0 or 1,
    // only double rounding does, and downstream code relies on (0,1)
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    Tensor out = x.value();
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        const double s =
            v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        // argument order keeps NaN flowing instead of laundering it into lo
        out[i] = std::min(std::max(s, lo), hi);
    }
    auto n = new_node(std::move(out), {x.node()});
    n->backward_op = [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const Tensor& y = self.value;
        for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y[i] * (1.0 - y[i]);
    };
    return Var(n);
}

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.n() != bv.n() || av.h() != bv.h() || av.w() != bv.w())
        throw std::invalid_argument("concat_channels: spatial/batch mismatch " + av.shape_str() +
                                    " vs " + bv.shape_str());
    Tensor out(av.n(), av.c() + bv.c(), av.h(), av.w());
    const size_t hw = static_cast<size_t>(av.h()) * av.w();
    for (int n = 0; n < av.n(); ++n) {
        std::copy_n(av.data() + static_cast<size_t>(n) * av.c() * hw, static_cast<size_t>(av.c()) * hw,
                    out.data() + static_cast<size_t>(n) * out.c() * hw);
        std::copy_n(bv.data() + static_cast<size_t>(n) * bv.c() * hw, static_cast<size_t>(bv.c()) * hw,
                    out.data() + (static_cast<size_t>(n) * out.c() + av.c()) * hw);
    }
    auto n = new_node(std::move(out), {a.node(), b.node()});
    n->backward_op = [](Node& self) {
        Node* pa = self.parents[0].get();
        Node* pb = self.parents[1].get();
        const Tensor& dy = self.grad;
        const size_t hw = static_cast<size_t>(dy.h()) * dy.w();
        const int ca = pa->value.c(), cb = pb->value.c();
        if (pa->requires_grad) {
            auto& g = pa->grad_buf();
            for (int n2 = 0; n2 < dy.n(); ++n2) {
                const double* src = dy.data() + static_cast<size_t>(n2) * dy.c() * hw;
                double* dst = g.data() + static_cast<size_t>(n2) * ca * hw;
                for (size_t i = 0; i < static_cast<size_t>(ca) * hw; ++i) dst[i] += src[i];
            }
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buf();
            for (int n2 = 0; n2 < dy.n(); ++n2) {
                const double* src = dy.data() + (static_cast<size_t>(n2) * dy.c() + ca) * hw;
                double* dst = g.data() + static_cast<size_t>(n2) * cb * hw;
                for (size_t i = 0; i < static_cast<size_t>(cb) * hw; ++i) dst[i] += src[i];
            }
        }
    };
    return Var(n);
}

Var resize_bilinear(const Var& x, int out_h, int out_w) {
    const Tensor& xv = x.value();
    if (out_h == xv.h() && out_w == xv.w()) {
        // identity resize still gets a node so callers can treat it uniformly
        Tensor out = xv;
        auto n = new_node(std::move(out), {x.node()});
        n->backward_op = [](Node& self) {
            Node* p = self.parents[0].get();
            if (!p->requires_grad) return;
            auto& g = p->grad_buf();
            for (size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        };
        return Var(n);
    }
    auto ly = std::make_shared<LerpWeights>(lerp_axis(xv.h(), out_h));
    auto lx = std::make_shared<LerpWeights>(lerp_axis(xv.w(), out_w));
    Tensor out(xv.n(), xv.c(), out_h, out_w);
    for (int n = 0; n < xv.n(); ++n)
        for (int c = 0; c < xv.c(); ++c) {
            const double* src = xv.data() + (static_cast<size_t>(n) * xv.c() + c) *
                                                (static_cast<size_t>(xv.h()) * xv.w());
            double* dst = out.data() + (static_cast<size_t>(n) * xv.c() + c) *
                                           (static_cast<size_t>(out_h) * out_w);
            for (int oy = 0; oy < out_h; ++oy) {
                const double* r0 = src + static_cast<size_t>(ly->i0[oy]) * xv.w();
                const double* r1 = src + static_cast<size_t>(ly->i1[oy]) * xv.w();
                const double wy0 = ly->w0[oy], wy1 = ly->w1[oy];
                for (int ox = 0; ox < out_w; ++ox) {
                    const double v0 = r0[lx->i0[ox]] * lx->w0[ox] + r0[lx->i1[ox]] * lx->w1[ox];
                    const double v1 = r1[lx->i0[ox]] * lx->w0[ox] + r1[lx->i1[ox]] * lx->w1[ox];
                    dst[oy * static_cast<size_t>(out_w) + ox] = wy0 * v0 + wy1 * v1;
                }
            }
        }
    auto n = new_node(std::move(out), {x.node()});
    n->backward_op = [ly, lx](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const Tensor& dy = self.grad;
        const int ih = p->value.h(), iw = p->value.w();
        for (int n2 = 0; n2 < dy.n(); ++n2)
            for (int c = 0; c < dy.c(); ++c) {
                double* dst = g.data() + (static_cast<size_t>(n2) * dy.c() + c) *
                                             (static_cast<size_t>(ih) * iw);
                const double* src = dy.data() + (static_cast<size_t>(n2) * dy.c() + c) *
                                                    (static_cast<size_t>(dy.h()) * dy.w());
                for (int oy = 0; oy < dy.h(); ++oy)
                    for (int ox = 0; ox < dy.w(); ++ox) {
                        const double v = src[oy * static_cast<size_t>(dy.w()) + ox];
                        dst[ly->i0[oy] * static_cast<size_t>(iw) + lx->i0[ox]] +=
                            v * ly->w0[oy] * lx->w0[ox];
                        dst[ly->i0[oy] * static_cast<size_t>(iw) + lx->i1[ox]] +=
                            v * ly->w0[oy] * lx->w1[ox];
                        dst[ly->i1[oy] * static_cast<size_t>(iw) + lx->i0[ox]] +=
                            v * ly->w1[oy] * lx->w0[ox];
                        dst[ly->i1[oy] * static_cast<size_t>(iw) + lx->i1[ox]] +=
                            v * ly->w1[oy] * lx->w1[ox];
                    }
            }
    };
    return Var(n);
}

Var global_avg_pool(const Var& x) {
    const Tensor& xv = x.value();
    const int hw = xv.h() * xv.w();
    Tensor out(xv.n(), xv.c(), 1, 1);
    for (int n = 0; n < xv.n(); ++n)
        for (int c = 0; c < xv.c(); ++c) {
            const double* row = xv.data() + (static_cast<size_t>(n) * xv.c() + c) * hw;
            double s = 0.0;
            for (int i = 0; i < hw; ++i) s += row[i];
            out[static_cast<size_t>(n) * xv.c() + c] = s / hw;
        }
    auto n = new_node(std::move(out), {x.node()});
    n->backward_op = [hw](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const Tensor& dy = self.grad;
        const int C = p->value.c();
        for (int n2 = 0; n2 < dy.n(); ++n2)
            for (int c = 0; c < C; ++c) {
                const double v = dy[static_cast<size_t>(n2) * C + c] / hw;
                double* row = g.data() + (static_cast<size_t>(n2) * C + c) * hw;
                for (int i = 0; i < hw; ++i) row[i] += v;
            }
    };
    return Var(n);
}

Var sum_all(const Var& x) {
    const Tensor& xv = x.value();
    double s = 0.0;
    for (size_t i = 0; i < xv.size(); ++i) s += xv[i];
    auto n = new_node(Tensor::scalar(s), {x.node()});
    n->backward_op = [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const double d = self.grad[0];
        for (size_t i = 0; i < g.size(); ++i) g[i] += d;
    };
    return Var(n);
}

namespace {

// softmax over a contiguous run of `len` values, repeated `reps` times
void softmax_runs(const double* src, double* dst, size_t reps, size_t len) {
    for (size_t r = 0; r < reps; ++r) {
        const double* s = src + r * len;
        double* d = dst + r * len;
        double mx = s[0];
        for (size_t i = 1; i < len; ++i) mx = std::max(mx, s[i]);
        double sum = 0.0;
        for (size_t i = 0; i < len; ++i) {
            d[i] = std::exp(s[i] - mx);
            sum += d[i];
        }
        const double inv = 1.0 / sum;
        for (size_t i = 0; i < len; ++i) d[i] *= inv;
    }
}

void softmax_runs_backward(const double* y, const double* dy, double* dx, size_t reps,
                           size_t len) {
    for (size_t r = 0; r < reps; ++r) {
        const double* yy = y + r * len;
        const double* gg = dy + r * len;
        double* dd = dx + r * len;
        double dot = 0.0;
        for (size_t i = 0; i < len; ++i) dot += yy[i] * gg[i];
        for (size_t i = 0; i < len; ++i) dd[i] += yy[i] * (gg[i] - dot);
    }
}

}  // namespace

Var softmax_spatial(const Var& x) {
    const Tensor& xv = x.value();
    const size_t len = static_cast<size_t>(xv.h()) * xv.w();
    const size_t reps = static_cast<size_t>(xv.n()) * xv.c();
    Tensor out(xv.n(), xv.c(), xv.h(), xv.w());
    softmax_runs(xv.data(), out.data(), reps, len);
    auto n = new_node(std::move(out), {x.node()});
    n->backward_op = [reps, len](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        softmax_runs_backward(self.value.data(), self.grad.data(), p->grad_buf().data(), reps,
                              len);
    };
    return Var(n);
}

Var softmax_channels(const Var& x) {
    const Tensor& xv = x.value();
    if (xv.h() != 1 || xv.w() != 1)
        throw std::invalid_argument("softmax_channels expects (N,C,1,1)");
    Tensor out(xv.n(), xv.c(), 1, 1);
    softmax_runs(xv.data(), out.data(), static_cast<size_t>(xv.n()), static_cast<size_t>(xv.c()));
    auto n = new_node(std::move(out), {x.node()});
    const size_t reps = static_cast<size_t>(xv.n());
    const size_t len = static_cast<size_t>(xv.c());
    n->backward_op = [reps, len](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        softmax_runs_backward(self.value.data(), self.grad.data(), p->grad_buf().data(), reps,
                              len);
    };
    return Var(n);
}

Var bce_mean(const Var& pred, const Tensor& target, double clamp_eps) {
    const Tensor& pv = pred.value();
    check_same_shape(pv, target, "bce_mean");
    const double lo = clamp_eps, hi = 1.0 - clamp_eps;
    const size_t N = pv.size();
    double acc = 0.0;
    for (size_t i = 0; i < N; ++i) {
        const double p = std::min(std::max(pv[i], lo), hi);  // NaN-preserving clamp
        const double g = target[i];
        acc += -(g * std::log(p) + (1.0 - g) * std::log(1.0 - p));
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(N));
    auto tgt = std::make_shared<Tensor>(target);
    auto n = new_node(std::move(out), {pred.node()});
    n->backward_op = [tgt, lo, hi, N](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        auto& g = p->grad_buf();
        const double dl = self.grad[0] / static_cast<double>(N);
        const Tensor& pv = p->value;
        for (size_t i = 0; i < N; ++i) {
            if (pv[i] <= lo || pv[i] >= hi) continue;  // flat outside the clamp
            const double t = (*tgt)[i];
            g[i] += dl * (pv[i] - t) / (pv[i] * (1.0 - pv[i]));
        }
    };
    return Var(n);
}

Var add_all(const std::vector<Var>& terms) {
    if (terms.empty()) throw std::invalid_argument("add_all: empty term list");
    Var acc = terms[0];
    for (size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

Tensor resize_bilinear_value(const Tensor& x, int out_h, int out_w) {
    if (out_h == x.h() && out_w == x.w()) return x;
    Var v = make_input(x);
    return resize_bilinear(v, out_h, out_w).value();
}

double bce_mean_value(const Tensor& pred, const Tensor& target, double clamp_eps) {
    check_same_shape(pred, target, "bce_mean");
    const double lo = clamp_eps, hi = 1.0 - clamp_eps;
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double p = std::min(std::max(pred[i], lo), hi);  // NaN-preserving clamp
        acc += -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
    }
    return acc / static_cast<double>(pred.size());
}

}  // namespace dsal
