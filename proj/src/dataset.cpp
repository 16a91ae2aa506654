#include "dsal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "dsal/autograd.hpp"
#include "dsal/common.hpp"
#include "dsal/image.hpp"

namespace dsal {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& what, int lineno) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("fixation csv line " + std::to_string(lineno) + ": bad " + what +
                        " '" + s + "'");
    return v;
}

}  // namespace

FixationParse parse_fixation_csv(const std::string& path, int width, int height) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open fixation csv: " + path);
    std::string line;
    if (!std::getline(f, line)) throw DataError("fixation csv is empty: " + path);
    {
        auto header = split_csv_line(line);
        if (header.size() != 4 || header[0] != "image_id" || header[1] != "x" ||
            header[2] != "y" || header[3] != "duration_ms")
            throw DataError("fixation csv header must be image_id,x,y,duration_ms: " + path);
    }
    FixationParse out;
    std::map<std::string, size_t> index;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto cols = split_csv_line(line);
        if (cols.size() != 4)
            throw DataError("fixation csv line " + std::to_string(lineno) +
                            ": expected 4 columns");
        const double x = parse_number(cols[1], "x", lineno);
        const double y = parse_number(cols[2], "y", lineno);
        const double d = parse_number(cols[3], "duration_ms", lineno);
        if (!(x >= 0.0 && x < width && y >= 0.0 && y < height && d > 0.0)) {
            ++out.rejected;
            continue;
        }
        auto it = index.find(cols[0]);
        if (it == index.end()) {
            index.emplace(cols[0], out.sets.size());
            out.sets.push_back({cols[0], {}});
            it = index.find(cols[0]);
        }
        out.sets[it->second].points.push_back({x, y, d});
    }
    return out;
}

double default_density_sigma(int width) { return static_cast<double>(width) / 20.0; }

Tensor fixation_density(const FixationSet& fix, int height, int width, double sigma) {
    if (height < 1 || width < 1) throw DataError("fixation_density: empty grid");
    if (sigma <= 0.0) throw DataError("fixation_density: sigma must be positive");
    Tensor impulses = Tensor::zeros(1, 1, height, width);
    double mass = 0.0;
    for (const auto& p : fix.points) {
        const int x = static_cast<int>(std::lround(p.x));
        const int y = static_cast<int>(std::lround(p.y));
        if (x < 0 || x >= width || y < 0 || y >= height || p.duration_ms <= 0.0)
            throw DataError("fixation_density: point out of bounds for " + fix.image_id);
        impulses.at(0, 0, y, x) += p.duration_ms;
        mass += p.duration_ms;
    }
    if (mass == 0.0) return impulses;  // no fixations: all-zero by contract
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    Tensor density = gaussian_blur(impulses, radius, sigma);
    double total = 0.0;
    for (size_t i = 0; i < density.size(); ++i) total += density[i];
    // border truncation loses a little smoothed mass; renormalize to unit sum
    for (size_t i = 0; i < density.size(); ++i) density[i] /= total;
    return density;
}

std::vector<ObjectInstance> instances_from_ids(const Tensor& ids) {
    if (ids.n() != 1 || ids.c() != 1) throw DataError("instance grid must be (1,1,H,W)");
    std::map<long, size_t> index;
    std::vector<ObjectInstance> out;
    for (int y = 0; y < ids.h(); ++y)
        for (int x = 0; x < ids.w(); ++x) {
            const long v = std::lround(ids.at(0, 0, y, x));
            long id;
            int category;
            if (v >= 1000) {
                id = v;
                category = static_cast<int>(v / 1000);
            } else if (v >= 7 && v < 34) {
                id = v;  // single-instance stuff label
                category = static_cast<int>(v);
            } else {
                continue;  // void / unlabeled
            }
            auto it = index.find(id);
            if (it == index.end()) {
                index.emplace(id, out.size());
                out.push_back({id, category, {}});
                it = index.find(id);
            }
            out[it->second].pixels.emplace_back(x, y);
        }
    return out;
}

double object_saliency(const ObjectInstance& obj, const std::vector<Tensor>& densities) {
    if (densities.empty()) throw DataError("object_saliency: no density maps");
    if (obj.pixels.empty()) throw DataError("object_saliency: empty object");
    double acc = 0.0;
    for (const auto& d : densities) {
        double total = 0.0;
        for (const auto& [x, y] : obj.pixels) {
            if (x < 0 || x >= d.w() || y < 0 || y >= d.h())
                throw DataError("object_saliency: pixel outside the density map");
            total += d.at(0, 0, y, x);
        }
        // total mass plus per-pixel average; evaluated in this exact form so
        // the brute-force oracle reproduces it bit for bit
        acc += total + total / static_cast<double>(obj.pixels.size());
    }
    return acc / static_cast<double>(densities.size());
}

std::vector<ScoreRow> score_table(const std::vector<ObjectInstance>& instances,
                                  const Tensor& density) {
    std::vector<ScoreRow> rows;
    rows.reserve(instances.size());
    for (const auto& obj : instances)
        rows.push_back({obj.instance_id, object_saliency(obj, {density}), false});
    return rows;
}

std::vector<long> select_salient(std::vector<ScoreRow>& table, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0))
        throw DataError("select_salient: ratio must be in (0, 1]");
    double max_score = 0.0;
    for (const auto& r : table) max_score = std::max(max_score, r.score);
    std::vector<long> ids;
    for (auto& r : table) {
        r.selected = max_score > 0.0 && r.score >= ratio * max_score;
        if (r.selected) ids.push_back(r.instance_id);
    }
    return ids;
}

Tensor rasterize_ground_truth(const std::vector<ObjectInstance>& selected, int height,
                              int width) {
    Tensor mask = Tensor::zeros(1, 1, height, width);
    for (const auto& obj : selected)
        for (const auto& [x, y] : obj.pixels) {
            if (x < 0 || x >= width || y < 0 || y >= height)
                throw DataError("rasterize_ground_truth: pixel outside the mask");
            mask.at(0, 0, y, x) = 1.0;
        }
    return mask;
}

Tensor aam(const std::vector<Tensor>& masks, int out_height, int out_width) {
    if (masks.empty()) throw DataError("aam: no masks");
    Tensor acc = Tensor::zeros(1, 1, out_height, out_width);
    for (const auto& m : masks) {
        Tensor r = (m.h() == out_height && m.w() == out_width)
                       ? m
                       : resize_bilinear_value(m, out_height, out_width);
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += r[i];
    }
    for (size_t i = 0; i < acc.size(); ++i) acc[i] /= static_cast<double>(masks.size());
    return acc;
}

DatasetStats dataset_stats(const std::vector<Tensor>& masks) {
    if (masks.empty()) throw DataError("dataset_stats: no masks");
    DatasetStats st;
    st.area_histogram.assign(10, 0);
    for (const auto& m : masks) {
        const int count = connected_components(m);
        if (static_cast<size_t>(count) >= st.count_histogram.size())
            st.count_histogram.resize(static_cast<size_t>(count) + 1, 0);
        ++st.count_histogram[static_cast<size_t>(count)];
        double fg = 0.0;
        for (size_t i = 0; i < m.size(); ++i) fg += m[i] > 0.5 ? 1.0 : 0.0;
        const double frac = fg / static_cast<double>(m.size());
        const int bin = std::min(9, static_cast<int>(frac * 10.0));
        ++st.area_histogram[static_cast<size_t>(bin)];
    }
    return st;
}

}  // namespace dsal
