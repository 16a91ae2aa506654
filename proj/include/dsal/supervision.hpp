#ifndef DSAL_SUPERVISION_HPP
#define DSAL_SUPERVISION_HPP

#include "dsal/boundary_decoder.hpp"
#include "dsal/tensor.hpp"

namespace dsal {

struct GroundTruthTriple {
    Tensor g0;  // salient-object mask
    Tensor gb;  // boundary band: dilate(g0, w) - erode(g0, w)
    Tensor gi;  // interior: erode(g0, w)
};

// band half-width scaled to resolution: 2 px at 256-row training images
int boundary_band_width(int height);

// morphological split of a batch of binary masks (N,1,H,W); disjoint bands,
// gi inside g0, all-zero masks stay all-zero
GroundTruthTriple derive_boundary_interior(const Tensor& g0, int width);

// mean binary cross-entropy with the standard 1e-7 clamp
double bce_loss(const Tensor& pred, const Tensor& gt);

// staged objective: sum over the 5 stages of BCE(m0, g0) [+ BCE(mb, gb) +
// BCE(mi, gi) when the bundle carries boundary/interior maps]
Var total_loss(const PredictionBundle& bundle, const Tensor& g0);
double total_loss_value(const PredictionBundle& bundle, const Tensor& g0);

}  // namespace dsal

#endif
