#ifndef DSAL_KNOWLEDGE_TRANSFER_HPP
#define DSAL_KNOWLEDGE_TRANSFER_HPP

#include <string>

#include "dsal/nn.hpp"

namespace dsal {

// value-level reference entry points (shared by tests and the graph path)
Tensor spatial_softmax_value(const Tensor& f);      // per-channel softmax over HxW
Tensor channel_softmax_gap_value(const Tensor& f);  // (N,C,1,1) softmax of spatial means
Tensor attention_map_value(const Tensor& f);        // product of the two; sums to 1 per image

// graph node: per-channel spatial distribution times channel distribution,
// broadcast over pixels; every entry >= 0 and the global sum is 1 per image
Var attention_map(const Var& f_g);

// residual knowledge-transfer unit: task features plus a learned shift
// computed from attention-purified general features. The closing 3x3 starts
// at zero, so a fresh unit is an exact identity on the task features.
struct KnowledgeTransferUnit {
    Conv2d proj;  // 1x1, channel-preserving
    Conv2d out;   // 3x3, zero-initialized
    Var operator()(const Var& f_g, const Var& f_s) const;
};

KnowledgeTransferUnit make_transfer_unit(ParamStore& ps, const std::string& name, int channels);

}  // namespace dsal

#endif
