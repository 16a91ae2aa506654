#ifndef DSAL_ENCODER_HPP
#define DSAL_ENCODER_HPP

#include <string>
#include <vector>

#include "dsal/nn.hpp"

namespace dsal {

struct EncoderStageSpec {
    int index;         // 1..5
    int stride;        // applied by the stage's first block
    int dilation;
    int out_channels;
    int num_blocks;
};

enum class EncoderScale { Tiny, Paper };

// tiny: 2 basic blocks per stage, channels 16-32-64-64-64, group norm.
// paper: 7x7 stem + bottleneck stages at ResNet-50 widths, frozen batch
// statistics (weights expected from an external checkpoint).
// both run strides (2,2,2,1,1) and dilations (1,1,1,2,4): the last two
// stages trade stride for dilation, so stages 3..5 share a spatial size
// and the cumulative stride stays 8.
std::vector<EncoderStageSpec> default_stage_specs(EncoderScale scale);

// throws std::invalid_argument on violations (wrong count, bad indices,
// nonpositive sizes, stage-5 stride != 1, decreasing channels)
void validate_stage_specs(const std::vector<EncoderStageSpec>& specs);

int cumulative_stride(const std::vector<EncoderStageSpec>& specs);

// five-stage residual feature extractor; parameters live in the store under
// `prefix`/stageI/...
class Encoder {
public:
    Encoder(ParamStore& ps, std::string prefix, std::vector<EncoderStageSpec> specs,
            EncoderScale scale, int in_channels = 3);

    // one stage (1-based), given the previous stage's features (or the image)
    Var stage(int i, const Var& x) const;

    // all five stages; input spatial size must divide by the cumulative stride
    std::vector<Var> forward(const Var& images) const;

    const std::vector<EncoderStageSpec>& specs() const { return specs_; }
    int stage_channels(int i) const { return specs_[static_cast<size_t>(i - 1)].out_channels; }
    const std::string& prefix() const { return prefix_; }

private:
    struct Block {
        bool bottleneck = false;
        bool stem = false;
        Conv2d c1, c2, c3;
        Norm n1, n2, n3;
        bool project = false;
        Conv2d sc;
        Norm sn;
    };
    std::string prefix_;
    std::vector<EncoderStageSpec> specs_;
    EncoderScale scale_;
    std::vector<std::vector<Block>> stages_;

    Var run_block(const Block& b, const Var& x) const;
};

// checked pyramid extraction (the op-level entry point)
std::vector<Var> encode(const Encoder& enc, const Var& images);

}  // namespace dsal

#endif
