#include "dsal/boundary_decoder.hpp"

#include <stdexcept>

namespace dsal {

Var DilatedStack::operator()(const Var& x) const {
    Var acc = x;
    Var h = x;
    for (const auto& c : convs) {
        h = c(h);
        acc = add(acc, h);
    }
    return acc;
}

DilatedStack make_dilated_stack(ParamStore& ps, const std::string& name, int channels,
                                const std::vector<int>& rates) {
    if (rates.empty()) throw std::invalid_argument("dilated stack needs at least one rate");
    DilatedStack s;
    for (size_t k = 0; k < rates.size(); ++k) {
        if (rates[k] < 1) throw std::invalid_argument("dilation rate must be >= 1");
        s.convs.push_back(make_conv(ps, name + "/d" + std::to_string(k), channels, channels, 3,
                                    1, -1, rates[k]));
    }
    return s;
}

std::pair<Var, Var> BoundaryBranch::operator()(const Var& f_d) const {
    Var h = elu(c2(elu(c1(f_d))));
    Var feat = elu(up(h));
    return {feat, logit(feat)};
}

BoundaryBranch make_boundary_branch(ParamStore& ps, const std::string& name, int channels) {
    BoundaryBranch b;
    b.c1 = make_conv(ps, name + "/conv1", channels, channels, 3);
    b.c2 = make_conv(ps, name + "/conv2", channels, channels, 3);
    b.up = make_deconv(ps, name + "/up", channels, channels, 4, 2, 1);
    b.logit = make_conv(ps, name + "/logit", channels, 1, 1, 1, 0);
    return b;
}

Var gated_fusion(const Var& f_trans, const Var& f_bnd, const Var& f_int, const Var& mb,
                 const Var& mi) {
    return add(f_trans, add(mul_spatial_gate(f_bnd, mb), mul_spatial_gate(f_int, mi)));
}

BfdResult BfdUnit::operator()(const Var& f_d) const {
    const int h = f_d.h(), w = f_d.w();
    auto [bnd_feat_2x, bnd_logits_2x] = boundary(f_d);
    Var bnd_feat = resize_bilinear(bnd_feat_2x, h, w);
    Var mb = sigmoid(resize_bilinear(bnd_logits_2x, h, w));

    Var f_trans = trans_proj(elu(trans_isd(f_d)));
    Var f_int = int_proj(elu(int_isd(f_d)));
    Var mi_logits = int_logit(f_int);
    Var mi = sigmoid(mi_logits);

    Var fused = gated_fusion(f_trans, bnd_feat, f_int, mb, mi);
    Var m0_logits = fuse_logit(fused);

    BfdResult r;
    r.fused = fused;
    r.m0 = sigmoid(m0_logits);
    r.mb = mb;
    r.mi = mi;
    r.m0_logits = m0_logits;
    r.mi_logits = mi_logits;
    r.mb_logits_2x = bnd_logits_2x;
    r.f_trans = f_trans;
    r.f_bnd = bnd_feat;
    r.f_int = f_int;
    return r;
}

BfdUnit make_bfd_unit(ParamStore& ps, const std::string& name, int channels,
                      const std::vector<int>& rates) {
    BfdUnit u;
    u.boundary = make_boundary_branch(ps, name + "/bnd", channels);
    u.trans_isd = make_dilated_stack(ps, name + "/trans/isd", channels, rates);
    u.trans_proj = make_conv(ps, name + "/trans/proj", channels, channels, 3);
    u.int_isd = make_dilated_stack(ps, name + "/int/isd", channels, rates);
    u.int_proj = make_conv(ps, name + "/int/proj", channels, channels, 3);
    u.int_logit = make_conv(ps, name + "/int/logit", channels, 1, 1, 1, 0);
    u.fuse_logit = make_conv(ps, name + "/fuse/logit", channels, 1, 1, 1, 0);
    return u;
}

std::vector<int> Decoder::stage_rates(int stage) {
    return stage >= 4 ? std::vector<int>{1, 2, 4, 8} : std::vector<int>{1, 2, 4};
}

Decoder::Decoder(ParamStore& ps, const std::vector<int>& stage_channels, int dec_channels,
                 bool use_bfd)
    : dec_channels_(dec_channels), use_bfd_(use_bfd) {
    if (stage_channels.size() != 5)
        throw std::invalid_argument("decoder expects 5 stage channel counts");
    for (int i = 1; i <= 5; ++i) {
        const std::string si = "/stage" + std::to_string(i);
        const int cin = stage_channels[static_cast<size_t>(i - 1)] + (i < 5 ? dec_channels : 0);
        lateral_.push_back(make_conv(ps, "dec_lateral" + si, cin, dec_channels, 3));
        head_.push_back(make_conv(ps, "dec_head" + si, dec_channels, 1, 3));
        if (use_bfd_) {
            // one namespace per branch so parameter collections stay separable
            BfdUnit u;
            u.boundary = make_boundary_branch(ps, "dec_boundary" + si, dec_channels);
            u.trans_isd =
                make_dilated_stack(ps, "dec_transition" + si + "/isd", dec_channels,
                                   stage_rates(i));
            u.trans_proj =
                make_conv(ps, "dec_transition" + si + "/proj", dec_channels, dec_channels, 3);
            u.int_isd = make_dilated_stack(ps, "dec_interior" + si + "/isd", dec_channels,
                                           stage_rates(i));
            u.int_proj =
                make_conv(ps, "dec_interior" + si + "/proj", dec_channels, dec_channels, 3);
            u.int_logit = make_conv(ps, "dec_interior" + si + "/logit", dec_channels, 1, 1, 1, 0);
            u.fuse_logit = make_conv(ps, "dec_fuse" + si, dec_channels, 1, 1, 1, 0);
            bfd_.push_back(std::move(u));
        }
    }
}

PredictionBundle Decoder::decode(const std::vector<Var>& task_pyramid, int out_h,
                                 int out_w) const {
    if (task_pyramid.size() != 5)
        throw std::invalid_argument("decode: expected a 5-level pyramid");
    PredictionBundle bundle;
    bundle.m0.resize(5);
    if (use_bfd_) {
        bundle.mb.resize(5);
        bundle.mi.resize(5);
    }
    Var carried;  // decoded features of the coarser neighbor
    for (int i = 5; i >= 1; --i) {
        const Var& f = task_pyramid[static_cast<size_t>(i - 1)];
        Var x = i == 5 ? f : concat_channels(f, resize_bilinear(carried, f.h(), f.w()));
        Var f_d = elu(lateral_[static_cast<size_t>(i - 1)](x));
        if (use_bfd_) {
            BfdResult r = bfd_[static_cast<size_t>(i - 1)](f_d);
            carried = r.fused;
            bundle.m0[static_cast<size_t>(i - 1)] =
                sigmoid(resize_bilinear(r.m0_logits, out_h, out_w));
            bundle.mb[static_cast<size_t>(i - 1)] =
                sigmoid(resize_bilinear(r.mb_logits_2x, out_h, out_w));
            bundle.mi[static_cast<size_t>(i - 1)] =
                sigmoid(resize_bilinear(r.mi_logits, out_h, out_w));
        } else {
            carried = f_d;
            Var logits = head_[static_cast<size_t>(i - 1)](f_d);
            bundle.m0[static_cast<size_t>(i - 1)] =
                sigmoid(resize_bilinear(logits, out_h, out_w));
        }
    }
    return bundle;
}

}  // namespace dsal
