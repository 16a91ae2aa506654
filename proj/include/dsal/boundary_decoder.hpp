#ifndef DSAL_BOUNDARY_DECODER_HPP
#define DSAL_BOUNDARY_DECODER_HPP

#include <string>
#include <vector>

#include "dsal/nn.hpp"

namespace dsal {

// integrated successive dilation: h_k = DilConv_k(h_{k-1}) chained over the
// rate list, output = x + Σ_k h_k. Channel-preserving; zero weights make it
// the identity.
struct DilatedStack {
    std::vector<Conv2d> convs;
    Var operator()(const Var& x) const;
};

DilatedStack make_dilated_stack(ParamStore& ps, const std::string& name, int channels,
                                const std::vector<int>& rates);

// two 3x3 convolutions then a 4x4/2 transposed convolution: branch features
// and single-channel logits both live at 2x the input grid
struct BoundaryBranch {
    Conv2d c1, c2;
    ConvTranspose2d up;
    Conv2d logit;
    // returns {features_2x, logits_2x}
    std::pair<Var, Var> operator()(const Var& f_d) const;
};

BoundaryBranch make_boundary_branch(ParamStore& ps, const std::string& name, int channels);

struct BfdResult {
    Var fused;        // F_T at the decoding grid
    Var m0, mb, mi;   // confidences at the decoding grid (mb from downsampled logits)
    Var m0_logits, mi_logits;  // native grid
    Var mb_logits_2x;          // boundary supervision grid (2x)
    Var f_trans, f_bnd, f_int;  // branch features entering the fusion
};

// confidence-gated additive fusion: f_trans + mb*f_bnd + mi*f_int with the
// single-channel gates broadcast over channels. Affine in both gates; zero
// gates reduce it to the transition features.
Var gated_fusion(const Var& f_trans, const Var& f_bnd, const Var& f_int, const Var& mb,
                 const Var& mi);

// boundary / transition / interior branches with confidence-gated fusion
struct BfdUnit {
    BoundaryBranch boundary;
    DilatedStack trans_isd;
    Conv2d trans_proj;
    DilatedStack int_isd;
    Conv2d int_proj;
    Conv2d int_logit;
    Conv2d fuse_logit;  // 1x1 over fused features -> m0
    BfdResult operator()(const Var& f_d) const;
};

BfdUnit make_bfd_unit(ParamStore& ps, const std::string& name, int channels,
                      const std::vector<int>& rates);

// per-stage predictions, each upsampled to the input resolution; mb/mi are
// empty when the decoder runs with plain heads
struct PredictionBundle {
    std::vector<Var> m0, mb, mi;
};

// progressive coarse-to-fine pyramid decoder. Stage i fuses encoder stage-i
// features with the upsampled decoded features of stage i+1 through a 3x3
// lateral, then predicts through either a BFD unit or a plain 3x3 head.
// Plain heads are materialized in every configuration so ablation variants
// share parameter names; they only drive predictions when use_bfd is off.
class Decoder {
public:
    Decoder(ParamStore& ps, const std::vector<int>& stage_channels, int dec_channels,
            bool use_bfd);

    PredictionBundle decode(const std::vector<Var>& task_pyramid, int out_h, int out_w) const;

    // dilation rates per stage: [1,2,4] for stages 1..3, [1,2,4,8] for 4..5
    static std::vector<int> stage_rates(int stage);

    int channels() const { return dec_channels_; }
    bool uses_bfd() const { return use_bfd_; }

private:
    int dec_channels_;
    bool use_bfd_;
    std::vector<Conv2d> lateral_;
    std::vector<Conv2d> head_;
    std::vector<BfdUnit> bfd_;
};

}  // namespace dsal

#endif
