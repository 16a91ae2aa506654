#include "dsal/model.hpp"

#include <stdexcept>

namespace dsal {

void validate_config(const ModelConfig& cfg) {
    if (cfg.input_height < 8 || cfg.input_width < 8)
        throw std::invalid_argument("model input must be at least 8x8");
    if (cfg.input_height % 8 != 0 || cfg.input_width % 8 != 0)
        throw std::invalid_argument("model input must divide by the cumulative stride 8");
    if (cfg.decoder_channels < 0)
        throw std::invalid_argument("decoder_channels must be nonnegative");
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
    return a.use_akt == b.use_akt && a.use_bfd == b.use_bfd &&
           a.use_pretrained_general == b.use_pretrained_general &&
           a.encoder_scale == b.encoder_scale && a.input_height == b.input_height &&
           a.input_width == b.input_width && a.decoder_channels == b.decoder_channels;
}

namespace {

int derived_decoder_channels(const ModelConfig& cfg) {
    if (cfg.decoder_channels > 0) return cfg.decoder_channels;
    return cfg.encoder_scale == EncoderScale::Tiny ? 16 : 64;
}

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), store_(seed) {
    validate_config(cfg_);
    auto specs = default_stage_specs(cfg_.encoder_scale);
    general_ = std::make_unique<Encoder>(store_, "general", specs, cfg_.encoder_scale);
    task_ = std::make_unique<Encoder>(store_, "task", specs, cfg_.encoder_scale);
    // plain per-stage heads over the general pyramid (pretraining targets)
    for (int i = 1; i <= 5; ++i)
        general_head_.push_back(make_conv(store_, "general_head/stage" + std::to_string(i),
                                          general_->stage_channels(i), 1, 3));
    if (cfg_.use_akt)
        for (int i = 1; i <= 4; ++i)
            transfer_.push_back(make_transfer_unit(store_, "transfer/stage" + std::to_string(i),
                                                   task_->stage_channels(i)));
    std::vector<int> stage_channels;
    for (int i = 1; i <= 5; ++i) stage_channels.push_back(task_->stage_channels(i));
    decoder_ = std::make_unique<Decoder>(store_, stage_channels, derived_decoder_channels(cfg_),
                                         cfg_.use_bfd);
}

void Model::check_input(const Var& images) const {
    if (images.c() != 3 || images.h() != cfg_.input_height || images.w() != cfg_.input_width)
        throw std::invalid_argument("model expects (N,3," + std::to_string(cfg_.input_height) +
                                    "," + std::to_string(cfg_.input_width) + "), got " +
                                    images.value().shape_str());
}

PredictionBundle Model::forward(const Var& images) const {
    check_input(images);
    std::vector<Var> general_pyr;
    if (cfg_.use_akt) general_pyr = encode(*general_, images);
    std::vector<Var> task_pyr;
    task_pyr.reserve(5);
    Var h = images;
    for (int i = 1; i <= 5; ++i) {
        h = task_->stage(i, h);
        if (cfg_.use_akt && i <= 4)
            h = transfer_[static_cast<size_t>(i - 1)](general_pyr[static_cast<size_t>(i - 1)],
                                                      h);
        task_pyr.push_back(h);
    }
    return decoder_->decode(task_pyr, cfg_.input_height, cfg_.input_width);
}

PredictionBundle Model::forward_general(const Var& images) const {
    check_input(images);
    auto pyr = encode(*general_, images);
    PredictionBundle bundle;
    bundle.m0.resize(5);
    for (int i = 1; i <= 5; ++i) {
        Var logits = general_head_[static_cast<size_t>(i - 1)](pyr[static_cast<size_t>(i - 1)]);
        bundle.m0[static_cast<size_t>(i - 1)] =
            sigmoid(resize_bilinear(logits, cfg_.input_height, cfg_.input_width));
    }
    return bundle;
}

Tensor Model::infer(const Tensor& image_rgb) const {
    if (image_rgb.n() != 1 || image_rgb.c() != 3)
        throw std::invalid_argument("infer expects a single (1,3,H,W) image");
    Tensor resized = resize_bilinear_value(image_rgb, cfg_.input_height, cfg_.input_width);
    PredictionBundle bundle = forward(make_input(std::move(resized)));
    return resize_bilinear_value(bundle.m0[0].value(), image_rgb.h(), image_rgb.w());
}

std::vector<std::string> Model::group_names() const {
    std::vector<std::string> names{"general", "general_head", "task", "dec_lateral",
                                   "dec_head"};
    if (cfg_.use_akt) names.push_back("transfer");
    if (cfg_.use_bfd) {
        names.push_back("dec_boundary");
        names.push_back("dec_transition");
        names.push_back("dec_interior");
        names.push_back("dec_fuse");
    }
    return names;
}

std::vector<Var> Model::group_params(const std::string& group) const {
    std::vector<Var> out;
    for (auto& [name, var] : store_.items(group + "/")) out.push_back(var);
    if (out.empty()) throw std::invalid_argument("unknown parameter group: " + group);
    return out;
}

std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const auto& g : group_names()) n += store_.value_count(g + "/");
    return n;
}

Model build_model(const ModelConfig& cfg, std::uint64_t seed) { return Model(cfg, seed); }

}  // namespace dsal
