#include "dsal/encoder.hpp"

#include <stdexcept>

namespace dsal {

std::vector<EncoderStageSpec> default_stage_specs(EncoderScale scale) {
    if (scale == EncoderScale::Tiny)
        return {{1, 2, 1, 16, 2},
                {2, 2, 1, 32, 2},
                {3, 2, 1, 64, 2},
                {4, 1, 2, 64, 2},
                {5, 1, 4, 64, 2}};
    return {{1, 2, 1, 64, 1},  // stem
            {2, 2, 1, 256, 3},
            {3, 2, 1, 512, 4},
            {4, 1, 2, 1024, 6},
            {5, 1, 4, 2048, 3}};
}

void validate_stage_specs(const std::vector<EncoderStageSpec>& specs) {
    if (specs.size() != 5)
        throw std::invalid_argument("encoder needs exactly 5 stage specs, got " +
                                    std::to_string(specs.size()));
    for (size_t i = 0; i < 5; ++i) {
        const auto& s = specs[i];
        if (s.index != static_cast<int>(i) + 1)
            throw std::invalid_argument("stage specs must be indexed 1..5 in order");
        if (s.stride < 1 || s.dilation < 1 || s.out_channels < 1 || s.num_blocks < 1)
            throw std::invalid_argument("stage " + std::to_string(s.index) +
                                        ": nonpositive field");
        if (i > 0 && s.out_channels < specs[i - 1].out_channels)
            throw std::invalid_argument("stage channels must be nondecreasing");
    }
    if (specs[4].stride != 1) throw std::invalid_argument("stage 5 must have stride 1");
}

int cumulative_stride(const std::vector<EncoderStageSpec>& specs) {
    int s = 1;
    for (const auto& sp : specs) s *= sp.stride;
    return s;
}

Encoder::Encoder(ParamStore& ps, std::string prefix, std::vector<EncoderStageSpec> specs,
                 EncoderScale scale, int in_channels)
    : prefix_(std::move(prefix)), specs_(std::move(specs)), scale_(scale) {
    validate_stage_specs(specs_);
    auto norm = [&](const std::string& name, int c) {
        return scale_ == EncoderScale::Tiny ? make_group_norm(ps, name, c)
                                            : make_frozen_norm(ps, name, c);
    };
    int cin = in_channels;
    stages_.resize(5);
    for (const auto& sp : specs_) {
        auto& blocks = stages_[static_cast<size_t>(sp.index - 1)];
        if (scale_ == EncoderScale::Paper && sp.index == 1) {
            // 7x7 stem
            Block b;
            b.stem = true;
            const std::string base =
                prefix_ + "/stage1/stem";
            b.c1 = make_conv(ps, base + "/conv", cin, sp.out_channels, 7, sp.stride, 3, 1,
                             false);
            b.n1 = norm(base + "/norm", sp.out_channels);
            blocks.push_back(std::move(b));
            cin = sp.out_channels;
            continue;
        }
        for (int j = 0; j < sp.num_blocks; ++j) {
            const int stride = j == 0 ? sp.stride : 1;
            const std::string base = prefix_ + "/stage" + std::to_string(sp.index) + "/block" +
                                     std::to_string(j);
            Block b;
            if (scale_ == EncoderScale::Paper) {
                b.bottleneck = true;
                const int mid = sp.out_channels / 4;
                b.c1 = make_conv(ps, base + "/conv1", cin, mid, 1, 1, 0, 1, false);
                b.n1 = norm(base + "/norm1", mid);
                b.c2 = make_conv(ps, base + "/conv2", mid, mid, 3, stride, -1, sp.dilation,
                                 false);
                b.n2 = norm(base + "/norm2", mid);
                b.c3 = make_conv(ps, base + "/conv3", mid, sp.out_channels, 1, 1, 0, 1, false);
                b.n3 = norm(base + "/norm3", sp.out_channels);
            } else {
                b.c1 = make_conv(ps, base + "/conv1", cin, sp.out_channels, 3, stride, -1,
                                 sp.dilation, false);
                b.n1 = norm(base + "/norm1", sp.out_channels);
                b.c2 = make_conv(ps, base + "/conv2", sp.out_channels, sp.out_channels, 3, 1,
                                 -1, sp.dilation, false);
                b.n2 = norm(base + "/norm2", sp.out_channels);
            }
            if (stride != 1 || cin != sp.out_channels) {
                b.project = true;
                b.sc = make_conv(ps, base + "/skip/conv", cin, sp.out_channels, 1, stride, 0, 1,
                                 false);
                b.sn = norm(base + "/skip/norm", sp.out_channels);
            }
            blocks.push_back(std::move(b));
            cin = sp.out_channels;
        }
    }
}

Var Encoder::run_block(const Block& b, const Var& x) const {
    if (b.stem) return elu(b.n1(b.c1(x)));
    Var h;
    if (b.bottleneck)
        h = b.n3(b.c3(elu(b.n2(b.c2(elu(b.n1(b.c1(x))))))));
    else
        h = b.n2(b.c2(elu(b.n1(b.c1(x)))));
    Var skip = b.project ? b.sn(b.sc(x)) : x;
    return elu(add(h, skip));
}

Var Encoder::stage(int i, const Var& x) const {
    Var h = x;
    for (const auto& b : stages_[static_cast<size_t>(i - 1)]) h = run_block(b, h);
    return h;
}

std::vector<Var> Encoder::forward(const Var& images) const {
    std::vector<Var> pyr;
    pyr.reserve(5);
    Var h = images;
    for (int i = 1; i <= 5; ++i) {
        h = stage(i, h);
        pyr.push_back(h);
    }
    return pyr;
}

std::vector<Var> encode(const Encoder& enc, const Var& images) {
    const int cs = cumulative_stride(enc.specs());
    if (images.h() % cs != 0 || images.w() % cs != 0)
        throw std::invalid_argument("encode: input " + images.value().shape_str() +
                                    " not divisible by cumulative stride " +
                                    std::to_string(cs));
    return enc.forward(images);
}

}  // namespace dsal
