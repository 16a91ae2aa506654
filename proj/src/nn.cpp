#include "dsal/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dsal {

Var ParamStore::get(const std::string& name, int n, int c, int h, int w, Init init) {
    auto it = params_.find(name);
    if (it != params_.end()) {
        const Tensor& v = it->second.value();
        if (v.n() != n || v.c() != c || v.h() != h || v.w() != w)
            throw std::logic_error("ParamStore: shape mismatch refetching " + name);
        return it->second;
    }
    Tensor t(n, c, h, w);
    switch (init) {
        case Init::Zero:
            break;
        case Init::One:
            t.fill(1.0);
            break;
        case Init::HeNormal: {
            // fan-in of a (Cout, Cin, kh, kw) kernel
            const double fan_in = static_cast<double>(c) * h * w;
            const double std = std::sqrt(2.0 / fan_in);
            Rng rng(name_seed(seed_, name));
            for (std::size_t i = 0; i < t.size(); ++i) t[i] = std * rng.normal();
            break;
        }
    }
    Var p = make_param(std::move(t), name);
    params_.emplace(name, p);
    return p;
}

Var ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::logic_error("ParamStore: unknown parameter " + name);
    return it->second;
}

std::vector<std::pair<std::string, Var>> ParamStore::items(const std::string& prefix) const {
    std::vector<std::pair<std::string, Var>> out;
    for (const auto& [name, var] : params_)
        if (name.rfind(prefix, 0) == 0) out.emplace_back(name, var);
    return out;
}

std::size_t ParamStore::value_count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& [name, var] : params_)
        if (name.rfind(prefix, 0) == 0) n += var.value().size();
    return n;
}

std::uint64_t ParamStore::content_hash(const std::string& prefix) const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t len) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& [name, var] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        mix(name.data(), name.size());
        mix(var.value().data(), var.value().size() * sizeof(double));
    }
    return h;
}

void ParamStore::zero_grad_all() {
    for (auto& [name, var] : params_) var.zero_grad();
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
    for (auto& [name, var] : params_)
        if (name.rfind(prefix, 0) == 0) var.node()->requires_grad = trainable;
}

void ParamStore::copy_values(const std::string& src_prefix, const std::string& dst_prefix) {
    for (const auto& [name, var] : params_) {
        if (name.rfind(src_prefix, 0) != 0) continue;
        const std::string dst = dst_prefix + name.substr(src_prefix.size());
        auto it = params_.find(dst);
        if (it == params_.end()) continue;
        check_same_shape(var.value(), it->second.value(), ("copy_values " + dst).c_str());
        it->second.value() = var.value();
    }
}

Conv2d make_conv(ParamStore& ps, const std::string& name, int cin, int cout, int k, int stride,
                 int pad, int dilation, bool bias, Init init) {
    Conv2d c;
    c.stride = stride;
    c.pad = pad >= 0 ? pad : dilation * (k - 1) / 2;
    c.dilation = dilation;
    c.w = ps.get(name + "/w", cout, cin, k, k, init);
    if (bias) c.b = ps.get(name + "/b", 1, cout, 1, 1, Init::Zero);
    return c;
}

ConvTranspose2d make_deconv(ParamStore& ps, const std::string& name, int cin, int cout, int k,
                            int stride, int pad) {
    ConvTranspose2d d;
    d.stride = stride;
    d.pad = pad;
    d.w = ps.get(name + "/w", cin, cout, k, k, Init::HeNormal);
    d.b = ps.get(name + "/b", 1, cout, 1, 1, Init::Zero);
    return d;
}

Norm make_group_norm(ParamStore& ps, const std::string& name, int channels) {
    Norm n;
    n.kind = Norm::Kind::Group;
    n.groups = channels % 8 == 0 ? 8 : 1;
    n.gamma = ps.get(name + "/gamma", 1, channels, 1, 1, Init::One);
    n.beta = ps.get(name + "/beta", 1, channels, 1, 1, Init::Zero);
    return n;
}

Norm make_frozen_norm(ParamStore& ps, const std::string& name, int channels) {
    Norm n;
    n.kind = Norm::Kind::Frozen;
    n.gamma = ps.get(name + "/gamma", 1, channels, 1, 1, Init::One);
    n.beta = ps.get(name + "/beta", 1, channels, 1, 1, Init::Zero);
    n.mean = Tensor::zeros(1, channels, 1, 1);
    n.var = Tensor::full(1, channels, 1, 1, 1.0);
    return n;
}

void Sgd::add_group(std::vector<Var> params, double lr_scale) {
    groups_.push_back({std::move(params), lr_scale});
}

void Sgd::step() {
    for (auto& g : groups_) {
        for (auto& p : g.params) {
            if (!p.requires_grad() || p.grad().empty()) continue;
            Tensor& theta = p.value();
            const Tensor& grad = p.grad();
            auto [it, fresh] = velocity_.try_emplace(p.node().get());
            if (fresh)
                it->second = Tensor::zeros(theta.n(), theta.c(), theta.h(), theta.w());
            Tensor& v = it->second;
            const double k = lr_ * g.scale;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                v[i] = momentum_ * v[i] + grad[i] + weight_decay_ * theta[i];
                theta[i] -= k * v[i];
            }
        }
    }
}

void Sgd::zero_grad() {
    for (auto& g : groups_)
        for (auto& p : g.params) p.zero_grad();
}

}  // namespace dsal
