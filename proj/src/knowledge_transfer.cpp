#include "dsal/knowledge_transfer.hpp"

namespace dsal {

Tensor spatial_softmax_value(const Tensor& f) {
    return softmax_spatial(make_input(f)).value();
}

Tensor channel_softmax_gap_value(const Tensor& f) {
    return softmax_channels(global_avg_pool(make_input(f))).value();
}

Tensor attention_map_value(const Tensor& f) {
    return attention_map(make_input(f)).value();
}

Var attention_map(const Var& f_g) {
    Var spatial = softmax_spatial(f_g);
    Var channel = softmax_channels(global_avg_pool(f_g));
    return mul_channel_weight(spatial, channel);
}

Var KnowledgeTransferUnit::operator()(const Var& f_g, const Var& f_s) const {
    check_same_shape(f_g.value(), f_s.value(), "knowledge transfer");
    // purified general features: attention applied before the residual block
    Var purified = mul_channel_weight(mul(softmax_spatial(f_g), f_g),
                                      softmax_channels(global_avg_pool(f_g)));
    Var shift = out(elu(proj(purified)));
    return add(f_s, shift);
}

KnowledgeTransferUnit make_transfer_unit(ParamStore& ps, const std::string& name,
                                         int channels) {
    KnowledgeTransferUnit u;
    u.proj = make_conv(ps, name + "/proj", channels, channels, 1);
    u.out = make_conv(ps, name + "/out", channels, channels, 3, 1, -1, 1, true, Init::Zero);
    return u;
}

}  // namespace dsal
