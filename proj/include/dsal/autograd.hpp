#ifndef DSAL_AUTOGRAD_HPP
#define DSAL_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsal/tensor.hpp"

namespace dsal {

// Reverse-mode tape over Tensor. A graph is built per forward pass; leaves
// (parameters, inputs) persist across passes. Everything is sequential and
// double precision so a seeded run is bit-reproducible.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::string name;  // parameters only
    std::vector<NodePtr> parents;
    // pulls this->grad into the parents' grads
    std::function<void(Node&)> backward_op;

    Tensor& grad_buf() {
        if (grad.empty()) grad = Tensor::zeros(value.n(), value.c(), value.h(), value.w());
        return grad;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad_buf() { return node_->grad_buf(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    NodePtr node() const { return node_; }

    void zero_grad() {
        if (node_ && !node_->grad.empty()) node_->grad.fill(0.0);
    }

    int n() const { return node_->value.n(); }
    int c() const { return node_->value.c(); }
    int h() const { return node_->value.h(); }
    int w() const { return node_->value.w(); }

private:
    NodePtr node_;
};

Var make_input(Tensor v);
Var make_param(Tensor v, const std::string& name);

// Accumulates into leaf .grad buffers; root must be scalar-shaped.
void backward(const Var& root);

// ---- ops ----
Var add(const Var& a, const Var& b);                  // same shape
Var sub(const Var& a, const Var& b);                  // same shape
Var mul(const Var& a, const Var& b);                  // same shape, elementwise
Var scale(const Var& a, double k);
Var add_channel_bias(const Var& x, const Var& b);     // b: (1,C,1,1)
Var mul_spatial_gate(const Var& x, const Var& g);     // g: (N,1,H,W), broadcast over C
Var mul_channel_weight(const Var& x, const Var& w);   // w: (N,C,1,1), broadcast over HW

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, int dilation);
// weight layout (Cin, Cout, kh, kw); output (H-1)*stride - 2*pad + k
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps = 1e-5);
// affine with fixed statistics (inference-style batch norm)
Var frozen_norm(const Var& x, const Var& gamma, const Var& beta,
                const Tensor& mean, const Tensor& var, double eps = 1e-5);

Var elu(const Var& x);
Var sigmoid(const Var& x);

Var concat_channels(const Var& a, const Var& b);
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var global_avg_pool(const Var& x);   // (N,C,1,1)
Var sum_all(const Var& x);           // scalar (1,1,1,1) sum of every element
Var softmax_spatial(const Var& x);   // softmax over HxW per (n,c)
Var softmax_channels(const Var& x);  // softmax over C; expects (N,C,1,1)

// mean over all elements of the clamped binary cross-entropy; target carries no grad
Var bce_mean(const Var& pred, const Tensor& target, double clamp_eps = 1e-7);

Var add_all(const std::vector<Var>& terms);

// ---- value-level helpers shared with non-graph code ----
Tensor resize_bilinear_value(const Tensor& x, int out_h, int out_w);
double bce_mean_value(const Tensor& pred, const Tensor& target, double clamp_eps = 1e-7);

}  // namespace dsal

#endif
