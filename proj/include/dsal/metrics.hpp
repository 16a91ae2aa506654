#ifndef DSAL_METRICS_HPP
#define DSAL_METRICS_HPP

#include <string>
#include <vector>

#include "dsal/tensor.hpp"

namespace dsal {

// Saliency evaluation per the field's standard protocols. Predictions live in
// [0,1]; ground truths are binarized at 0.5. Shared constants are documented
// next to each function.

double metric_mae(const Tensor& pred, const Tensor& gt);

// max F over thresholds 1..255 of the 8-bit-quantized prediction, beta^2=0.3.
// An all-background ground truth has no defined recall: *defined is cleared
// and 0 returned; callers must exclude the image from the average.
double metric_f_beta(const Tensor& pred, const Tensor& gt, bool* defined);

// weighted F-measure: errors copied from the nearest foreground pixel
// (exact Euclidean distance transform, ties resolved by smallest (d^2,
// column, row)), 7x7 sigma-5 Gaussian dependency smoothing, MIN rule on
// foreground, exponential distance decay on background errors, beta^2 = 1
double metric_weighted_f_beta(const Tensor& pred, const Tensor& gt, bool* defined);

// structure measure: 0.5*object + 0.5*region; degenerate ground truths fall
// back to mean-based scores; result clamped to >= 0
double metric_s_measure(const Tensor& pred, const Tensor& gt);

struct MetricReport {
    double mae = 0.0;
    double f_beta = 0.0;
    double weighted_f_beta = 0.0;
    double s_measure = 0.0;
    int n_images = 0;
    int skipped_f = 0;  // images excluded from both F averages (empty gt)
};

// pairs *.png files by name across the two directories (exact set match or
// DataError listing offenders); predictions are bilinearly resized to the
// ground-truth grid when sizes differ
MetricReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir);

std::string report_csv(const MetricReport& r);   // header + one row
std::string report_text(const MetricReport& r);  // aligned human-readable form

// ---- published-number registry ----------------------------------------------

struct RegistryRow {
    std::string method;
    std::string phase;  // before | after
    double mae = 0.0;
    double f_w_beta = 0.0;
    double f_beta = 0.0;
    double s_m = 0.0;
    bool uses_crf = false;
};

// CSV columns: method,phase,mae,f_w_beta,f_beta,s_m,uses_crf
std::vector<RegistryRow> load_registry(const std::string& path);

// nullptr when the (method, phase) pair is absent
const RegistryRow* registry_lookup(const std::vector<RegistryRow>& rows,
                                   const std::string& method, const std::string& phase);

struct RegistryDelta {
    RegistryRow reference;
    double d_mae = 0.0;       // report minus reference, signed
    double d_f_w_beta = 0.0;
    double d_f_beta = 0.0;
    double d_s_m = 0.0;
};

RegistryDelta registry_compare(const MetricReport& report,
                               const std::vector<RegistryRow>& rows,
                               const std::string& method, const std::string& phase);

}  // namespace dsal

#endif
