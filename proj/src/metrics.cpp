#include "dsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dsal/autograd.hpp"
#include "dsal/common.hpp"
#include "dsal/image.hpp"
#include "dsal/png_io.hpp"

namespace dsal {

namespace {

// regularizer used by the reference evaluation scripts (double machine epsilon)
constexpr double kEps = 2.2204460492503131e-16;

void require_pair(const Tensor& pred, const Tensor& gt, const char* what) {
    if (pred.n() != 1 || pred.c() != 1)
        throw std::invalid_argument(std::string(what) + ": expected (1,1,H,W) maps, got " +
                                    pred.shape_str());
    check_same_shape(pred, gt, what);
}

long foreground_count(const Tensor& gt) {
    long pos = 0;
    for (size_t i = 0; i < gt.size(); ++i)
        if (gt[i] > 0.5) ++pos;
    return pos;
}

}  // namespace

double metric_mae(const Tensor& pred, const Tensor& gt) {
    require_pair(pred, gt, "metric_mae");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double g = gt[i] > 0.5 ? 1.0 : 0.0;
        acc += std::fabs(pred[i] - g);
    }
    return acc / static_cast<double>(pred.size());
}

double metric_f_beta(const Tensor& pred, const Tensor& gt, bool* defined) {
    require_pair(pred, gt, "metric_f_beta");
    const double b2 = 0.3;
    const long pos = foreground_count(gt);
    if (pos == 0) {
        if (defined) *defined = false;
        return 0.0;
    }
    if (defined) *defined = true;
    // histogram over quantized levels; a downward sweep yields every
    // threshold's TP / predicted-positive counts in one pass
    long hist_pos[256] = {0}, hist_all[256] = {0};
    for (size_t i = 0; i < pred.size(); ++i) {
        const int q = static_cast<int>(
            std::lround(std::max(0.0, std::min(1.0, pred[i])) * 255.0));
        ++hist_all[q];
        if (gt[i] > 0.5) ++hist_pos[q];
    }
    double best = 0.0;
    long tp = 0, pp = 0;
    for (int t = 255; t >= 1; --t) {
        tp += hist_pos[t];
        pp += hist_all[t];
        const double p = pp > 0 ? static_cast<double>(tp) / static_cast<double>(pp) : 0.0;
        const double r = static_cast<double>(tp) / static_cast<double>(pos);
        const double den = b2 * p + r;
        if (den > 0) best = std::max(best, (1.0 + b2) * p * r / den);
    }
    return best;
}

double metric_weighted_f_beta(const Tensor& pred, const Tensor& gt, bool* defined) {
    require_pair(pred, gt, "metric_weighted_f_beta");
    const int H = pred.h(), W = pred.w();
    const long pos = foreground_count(gt);
    if (pos == 0) {
        if (defined) *defined = false;
        return 0.0;
    }
    if (defined) *defined = true;

    const size_t N = static_cast<size_t>(H) * W;
    Tensor gmask(1, 1, H, W);
    for (size_t i = 0; i < N; ++i) gmask[i] = gt[i] > 0.5 ? 1.0 : 0.0;
    const DistanceField field = distance_transform(gmask);

    // absolute error, with background errors replaced by the error at the
    // nearest foreground pixel before smoothing
    std::vector<double> E(N);
    Tensor Et(1, 1, H, W);
    for (size_t i = 0; i < N; ++i) E[i] = std::fabs(gmask[i] - pred[i]);
    for (size_t i = 0; i < N; ++i)
        Et[i] = gmask[i] > 0.5 ? E[i] : E[static_cast<size_t>(field.nearest[i])];
    const Tensor EA = gaussian_blur(Et, 3, 5.0);

    double sum_ew_fg = 0.0, sum_ew_bg = 0.0;
    for (size_t i = 0; i < N; ++i) {
        const bool fg = gmask[i] > 0.5;
        const double e = fg && EA[i] < E[i] ? EA[i] : E[i];
        if (fg) {
            sum_ew_fg += e;
        } else {
            // errors far from any object count nearly double
            sum_ew_bg += e * (2.0 - std::exp(std::log(0.5) / 5.0 * field.dist[i]));
        }
    }
    const double tpw = static_cast<double>(pos) - sum_ew_fg;
    const double fpw = sum_ew_bg;
    const double recall = 1.0 - sum_ew_fg / static_cast<double>(pos);
    const double precision = tpw / (kEps + tpw + fpw);
    return 2.0 * recall * precision / (kEps + recall + precision);
}

namespace {

// similarity between the prediction restricted to one side of the ground
// truth and an ideal constant map: 2x / (x^2 + 1 + sigma_x)
double object_score(const Tensor& pred, const Tensor& gt, bool fg) {
    double sum = 0.0;
    long cnt = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if ((gt[i] > 0.5) != fg) continue;
        sum += fg ? pred[i] : 1.0 - pred[i];
        ++cnt;
    }
    const double x = sum / static_cast<double>(cnt);
    double var = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if ((gt[i] > 0.5) != fg) continue;
        const double d = (fg ? pred[i] : 1.0 - pred[i]) - x;
        var += d * d;
    }
    const double sx = cnt > 1 ? std::sqrt(var / static_cast<double>(cnt - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sx + kEps);
}

// SSIM-style similarity over one rectangle, unbiased (n-1) moments
double region_ssim(const Tensor& pred, const Tensor& gt, int y0, int y1, int x0, int x1) {
    const int W = pred.w();
    const long n = static_cast<long>(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0.0, my = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const size_t i = static_cast<size_t>(y) * W + x;
            mx += pred[i];
            my += gt[i] > 0.5 ? 1.0 : 0.0;
        }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0, vxy = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const size_t i = static_cast<size_t>(y) * W + x;
            const double a = pred[i] - mx;
            const double b = (gt[i] > 0.5 ? 1.0 : 0.0) - my;
            vx += a * a;
            vy += b * b;
            vxy += a * b;
        }
    const double den = n > 1 ? static_cast<double>(n - 1) : 1.0;
    vx /= den;
    vy /= den;
    vxy /= den;
    const double num = 4.0 * mx * my * vxy;
    const double dnm = (mx * mx + my * my) * (vx + vy);
    if (num != 0.0) return num / (dnm + kEps);
    return dnm == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double metric_s_measure(const Tensor& pred, const Tensor& gt) {
    require_pair(pred, gt, "metric_s_measure");
    const int H = pred.h(), W = pred.w();
    const size_t N = pred.size();
    const long pos = foreground_count(gt);
    double pred_mean = 0.0;
    for (size_t i = 0; i < N; ++i) pred_mean += pred[i];
    pred_mean /= static_cast<double>(N);
    // degenerate ground truths grade the prediction's mean directly
    if (pos == 0) return 1.0 - pred_mean;
    if (pos == static_cast<long>(N)) return pred_mean;

    const double u = static_cast<double>(pos) / static_cast<double>(N);
    const double s_o = u * object_score(pred, gt, true) +
                       (1.0 - u) * object_score(pred, gt, false);

    // split about the rounded 1-based foreground centroid; X and Y double as
    // the sizes of the top-left block
    double sx = 0.0, sy = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            if (gt[static_cast<size_t>(y) * W + x] > 0.5) {
                sx += x + 1;
                sy += y + 1;
            }
    const int X = static_cast<int>(std::lround(sx / static_cast<double>(pos)));
    const int Y = static_cast<int>(std::lround(sy / static_cast<double>(pos)));
    const double area = static_cast<double>(N);
    const double w1 = static_cast<double>(X) * Y / area;
    const double w2 = static_cast<double>(W - X) * Y / area;
    const double w3 = static_cast<double>(X) * (H - Y) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    const double s_r = w1 * region_ssim(pred, gt, 0, Y, 0, X) +
                       w2 * region_ssim(pred, gt, 0, Y, X, W) +
                       w3 * region_ssim(pred, gt, Y, H, 0, X) +
                       w4 * region_ssim(pred, gt, Y, H, X, W);
    return std::max(0.0, 0.5 * s_o + 0.5 * s_r);
}

// ---- directory evaluation -----------------------------------------------------

namespace {

std::vector<std::string> png_names(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DataError("evaluate: not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) {
        if (!s.empty()) s += ' ';
        s += e;
    }
    return s;
}

}  // namespace

MetricReport evaluate_dirs(const std::string& pred_dir, const std::string& gt_dir) {
    const auto pred_names = png_names(pred_dir);
    const auto gt_names = png_names(gt_dir);
    if (pred_names != gt_names) {
        std::vector<std::string> pred_only, gt_only;
        std::set_difference(pred_names.begin(), pred_names.end(), gt_names.begin(),
                            gt_names.end(), std::back_inserter(pred_only));
        std::set_difference(gt_names.begin(), gt_names.end(), pred_names.begin(),
                            pred_names.end(), std::back_inserter(gt_only));
        throw DataError("evaluate: prediction/ground-truth sets differ (prediction only: [" +
                        join(pred_only) + "]; ground truth only: [" + join(gt_only) + "])");
    }
    if (pred_names.empty()) throw DataError("evaluate: no .png files in " + pred_dir);

    namespace fs = std::filesystem;
    MetricReport r;
    double sum_mae = 0.0, sum_f = 0.0, sum_wf = 0.0, sum_s = 0.0;
    for (const auto& name : pred_names) {
        Tensor pred = read_png_gray((fs::path(pred_dir) / name).string());
        const Tensor gt = read_png_gray((fs::path(gt_dir) / name).string());
        if (!pred.same_shape(gt)) pred = resize_bilinear_value(pred, gt.h(), gt.w());
        sum_mae += metric_mae(pred, gt);
        sum_s += metric_s_measure(pred, gt);
        bool defined = true;
        const double f = metric_f_beta(pred, gt, &defined);
        if (defined) {
            sum_f += f;
            sum_wf += metric_weighted_f_beta(pred, gt, nullptr);
        } else {
            ++r.skipped_f;
        }
        ++r.n_images;
    }
    r.mae = sum_mae / r.n_images;
    r.s_measure = sum_s / r.n_images;
    const int f_images = r.n_images - r.skipped_f;
    r.f_beta = f_images > 0 ? sum_f / f_images : 0.0;
    r.weighted_f_beta = f_images > 0 ? sum_wf / f_images : 0.0;
    return r;
}

std::string report_csv(const MetricReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "mae,f_w_beta,f_beta,s_m,n_images,skipped_f\n%.6f,%.6f,%.6f,%.6f,%d,%d\n",
                  r.mae, r.weighted_f_beta, r.f_beta, r.s_measure, r.n_images, r.skipped_f);
    return buf;
}

std::string report_text(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "images     %d (F-measures over %d, %d empty-mask skips)\n"
                  "MAE        %.4f\n"
                  "wF_beta    %.4f\n"
                  "F_beta     %.4f\n"
                  "S_measure  %.4f\n",
                  r.n_images, r.n_images - r.skipped_f, r.skipped_f, r.mae, r.weighted_f_beta,
                  r.f_beta, r.s_measure);
    return buf;
}

// ---- published-number registry --------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_metric(const std::string& s, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
        throw DataError("registry: bad number '" + s + "' in " + where);
    return v;
}

}  // namespace

std::vector<RegistryRow> load_registry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("registry: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("registry: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "method,phase,mae,f_w_beta,f_beta,s_m,uses_crf")
        throw DataError("registry: unexpected header '" + line + "' in " + path);
    std::vector<RegistryRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto f = split_csv(line);
        if (f.size() != 7) throw DataError("registry: expected 7 fields in " + where);
        RegistryRow row;
        row.method = f[0];
        row.phase = f[1];
        if (row.method.empty()) throw DataError("registry: empty method in " + where);
        if (row.phase != "before" && row.phase != "after")
            throw DataError("registry: phase must be before|after in " + where);
        row.mae = parse_metric(f[2], where);
        row.f_w_beta = parse_metric(f[3], where);
        row.f_beta = parse_metric(f[4], where);
        row.s_m = parse_metric(f[5], where);
        if (f[6] == "0")
            row.uses_crf = false;
        else if (f[6] == "1")
            row.uses_crf = true;
        else
            throw DataError("registry: uses_crf must be 0|1 in " + where);
        if (registry_lookup(rows, row.method, row.phase))
            throw DataError("registry: duplicate row " + row.method + "/" + row.phase + " in " +
                            where);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("registry: no rows in " + path);
    return rows;
}

const RegistryRow* registry_lookup(const std::vector<RegistryRow>& rows,
                                   const std::string& method, const std::string& phase) {
    for (const auto& r : rows)
        if (r.method == method && r.phase == phase) return &r;
    return nullptr;
}

RegistryDelta registry_compare(const MetricReport& report, const std::vector<RegistryRow>& rows,
                               const std::string& method, const std::string& phase) {
    const RegistryRow* ref = registry_lookup(rows, method, phase);
    if (!ref) throw DataError("registry: no row for " + method + "/" + phase);
    RegistryDelta d;
    d.reference = *ref;
    d.d_mae = report.mae - ref->mae;
    d.d_f_w_beta = report.weighted_f_beta - ref->f_w_beta;
    d.d_f_beta = report.f_beta - ref->f_beta;
    d.d_s_m = report.s_measure - ref->s_m;
    return d;
}

}  // namespace dsal
