#ifndef DSAL_MODEL_HPP
#define DSAL_MODEL_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsal/boundary_decoder.hpp"
#include "dsal/encoder.hpp"
#include "dsal/knowledge_transfer.hpp"

namespace dsal {

struct ModelConfig {
    bool use_akt = true;
    bool use_bfd = true;
    bool use_pretrained_general = false;  // seed the task encoder from trained general weights
    EncoderScale encoder_scale = EncoderScale::Tiny;
    int input_height = 256;
    int input_width = 512;
    int decoder_channels = 0;  // 0 = derived from scale (16 tiny, 64 paper)
};

void validate_config(const ModelConfig& cfg);
bool operator==(const ModelConfig& a, const ModelConfig& b);

// twin five-stage encoders, optional knowledge-transfer units after task
// stages 1..4, and the progressive decoder. One ParamStore owns everything;
// ablation variants built from the same seed share identical values for
// every parameter name they have in common.
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return store_.seed(); }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

    // task-side forward: general encoder (when the knowledge path is on),
    // task encoder with per-stage transfer, decoder
    PredictionBundle forward(const Var& images) const;

    // general-side forward for pretraining: general pyramid through the
    // plain per-stage heads; always 5 maps
    PredictionBundle forward_general(const Var& images) const;

    // single-image inference: resize to the configured resolution, run the
    // task forward, return the finest confidence map resized back
    Tensor infer(const Tensor& image_rgb) const;

    // parameter collections in this configuration, in reporting order
    std::vector<std::string> group_names() const;
    std::vector<Var> group_params(const std::string& group) const;
    std::size_t param_count() const;  // scalar count over all collections

    const Encoder& general_encoder() const { return *general_; }
    const Encoder& task_encoder() const { return *task_; }
    const Decoder& decoder() const { return *decoder_; }

private:
    ModelConfig cfg_;
    ParamStore store_;
    std::unique_ptr<Encoder> general_, task_;
    std::vector<KnowledgeTransferUnit> transfer_;
    std::unique_ptr<Decoder> decoder_;
    std::vector<Conv2d> general_head_;

    void check_input(const Var& images) const;
};

Model build_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace dsal

#endif
