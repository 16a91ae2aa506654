#ifndef DSAL_TRAIN_HPP
#define DSAL_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dsal/model.hpp"
#include "dsal/tensor.hpp"

namespace dsal {

// one training example: RGB image (1,3,H,W) in [0,1] and a binary mask (1,1,H,W)
struct Sample {
    Tensor image;
    Tensor mask;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double head_lr_multiplier = 10.0;  // freshly initialized modules step 10x faster
    double weight_decay = 5e-4;
    double momentum = 0.9;
    int batch_size = 4;
    long iterations = 0;  // required
    bool flip = true;     // random horizontal mirroring
    std::uint64_t seed = 0;
    std::string checkpoint_dir;  // empty: keep no snapshots
    std::string log_path;        // empty: no per-iteration csv
};

struct TrainResult {
    double initial_loss = 0.0;  // probe batch before the first update
    double final_loss = 0.0;    // same probe after the last update
    long iterations_run = 0;
    std::vector<std::string> checkpoint_paths;
};

// resize to the training resolution (bilinear image, nearest mask so it stays
// binary), optionally mirrored left-right
Sample fit_sample(const Sample& s, int height, int width, bool mirror);

// pretraining pass: the general tower (x1) and its per-stage heads (x10)
// against the plain objective sum_i BCE(m0_i, g0). General snapshots.
TrainResult train_general(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg);

// fine-tuning pass: freezes the general tower (verified unchanged), optionally
// seeds the task encoder from it, then optimizes the task encoder (x1) with
// the transfer units and decoder (x10) against the staged boundary-aware
// objective. Full snapshots.
TrainResult train_task(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg);

// ---- gradient validation ------------------------------------------------------

struct GradCheckGroup {
    std::string group;
    int checked = 0;
    double max_rel = 0.0;
};

struct GradCheckReport {
    double max_rel = 0.0;
    std::vector<GradCheckGroup> groups;
};

// central-difference check of the end-to-end task objective: samples up to
// samples_per_group scalars from every parameter collection, nudges each by
// 1e-4 * max(1, |theta|), and reports |analytic - numeric| relative error
// (floored at 1e-6). Collections the objective never touches must come out
// exactly zero.
GradCheckReport grad_check(Model& m, const Tensor& images, const Tensor& masks,
                           int samples_per_group = 200, std::uint64_t seed = 0);

}  // namespace dsal

#endif
