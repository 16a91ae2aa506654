#ifndef DSAL_IMAGE_HPP
#define DSAL_IMAGE_HPP

#include <cstdint>
#include <vector>

#include "dsal/tensor.hpp"

namespace dsal {

// 2D grids (masks, density maps, saliency maps) travel as (1,1,H,W) tensors.

Tensor resize_nearest(const Tensor& x, int out_h, int out_w);

// binary morphology with a square structuring element of side 2*width+1;
// input treated as foreground where > 0.5
Tensor dilate(const Tensor& mask, int width);
Tensor erode(const Tensor& mask, int width);

// 8-connected foreground component count; labels (0 = background, 1..count)
// written to *labels when given
int connected_components(const Tensor& mask, std::vector<int>* labels = nullptr);

// normalized 1D Gaussian taps, length 2*radius+1
std::vector<double> gaussian_taps(int radius, double sigma);

// separable Gaussian blur with zero padding at the borders
Tensor gaussian_blur(const Tensor& x, int radius, double sigma);

// Exact Euclidean distance transform: for every pixel, the distance to the
// nearest foreground (> 0.5) pixel and that pixel's row-major index. Ties
// resolve to the smallest (distance², column, row) triple. All-background
// input gives infinite distances and index -1.
struct DistanceField {
    std::vector<double> dist;   // Euclidean
    std::vector<int> nearest;   // row-major index of the closest foreground pixel
};
DistanceField distance_transform(const Tensor& mask);

// foreground centroid (center of mass); returns false for an empty mask
bool centroid(const Tensor& mask, double* cx, double* cy);

}  // namespace dsal

#endif
