#ifndef DSAL_DATASET_HPP
#define DSAL_DATASET_HPP

#include <string>
#include <utility>
#include <vector>

#include "dsal/tensor.hpp"

namespace dsal {

// ---- fixations --------------------------------------------------------------

struct Fixation {
    double x = 0.0, y = 0.0;      // pixel coordinates
    double duration_ms = 0.0;     // > 0
};

struct FixationSet {
    std::string image_id;
    std::vector<Fixation> points;
};

struct FixationParse {
    std::vector<FixationSet> sets;  // grouped by image id, first-seen order
    int rejected = 0;               // rows dropped for bad coordinates/durations
};

// CSV columns: image_id,x,y,duration_ms (header required). Rows outside
// [0,width) x [0,height) or with nonpositive durations are counted and dropped.
FixationParse parse_fixation_csv(const std::string& path, int width, int height);

// duration-weighted impulses smoothed by an isotropic Gaussian (radius 3
// sigma), renormalized to unit mass; all-zero when no fixation exists
Tensor fixation_density(const FixationSet& fix, int height, int width, double sigma);

// default smoothing bandwidth for a given map width
double default_density_sigma(int width);

// ---- object instances -------------------------------------------------------

struct ObjectInstance {
    long instance_id = 0;
    int category = 0;
    std::vector<std::pair<int, int>> pixels;  // (x, y), raster order
};

// Instance-id grids use the Cityscapes gtFine encoding: values >= 1000 are
// category*1000 + index; values in [7, 34) are single-instance stuff labels;
// smaller values are void and ignored.
std::vector<ObjectInstance> instances_from_ids(const Tensor& ids);

// mean over the given density maps of (total mass on the object + its
// per-pixel average); see score notes in the module docs
double object_saliency(const ObjectInstance& obj, const std::vector<Tensor>& densities);

// ---- selection --------------------------------------------------------------

struct ScoreRow {
    long instance_id = 0;
    double score = 0.0;
    bool selected = false;
};

// scores for every instance against one image's density map (table order =
// instance order)
std::vector<ScoreRow> score_table(const std::vector<ObjectInstance>& instances,
                                  const Tensor& density);

// flags rows with score >= ratio * max score; returns selected ids in table
// order. A table whose maximum is zero selects nothing.
std::vector<long> select_salient(std::vector<ScoreRow>& table, double ratio = 0.8);

Tensor rasterize_ground_truth(const std::vector<ObjectInstance>& selected, int height,
                              int width);

// ---- dataset statistics -----------------------------------------------------

// bilinearly resize every mask to out shape, average pixelwise
Tensor aam(const std::vector<Tensor>& masks, int out_height, int out_width);

struct DatasetStats {
    std::vector<long> count_histogram;        // index = per-image component count
    std::vector<long> area_histogram;         // 10 uniform bins over [0,1]
};

DatasetStats dataset_stats(const std::vector<Tensor>& masks);

}  // namespace dsal

#endif
