#include "dsal/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dsal {

namespace {

void require_plane(const Tensor& x, const char* what) {
    if (x.n() != 1 || x.c() != 1)
        throw std::invalid_argument(std::string(what) + ": expected a (1,1,H,W) grid, got " +
                                    x.shape_str());
}

}  // namespace

Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
    if (out_h == x.h() && out_w == x.w()) return x;
    Tensor out(x.n(), x.c(), out_h, out_w);
    const double sy = static_cast<double>(x.h()) / out_h;
    const double sx = static_cast<double>(x.w()) / out_w;
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < x.c(); ++c)
            for (int oy = 0; oy < out_h; ++oy) {
                int iy = std::min(static_cast<int>((oy + 0.5) * sy), x.h() - 1);
                for (int ox = 0; ox < out_w; ++ox) {
                    int ix = std::min(static_cast<int>((ox + 0.5) * sx), x.w() - 1);
                    out.at(n, c, oy, ox) = x.at(n, c, iy, ix);
                }
            }
    return out;
}

namespace {

// separable min/max over a (2*width+1) square window, zero-padded
Tensor morph(const Tensor& mask, int width, bool take_max) {
    require_plane(mask, "morphology");
    if (width < 1) throw std::invalid_argument("morphology: width must be >= 1");
    const int H = mask.h(), W = mask.w();
    // outside the image counts as background for both operations, so border
    // foreground erodes away
    auto fg = [&](int y, int x) -> double {
        if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
        return mask.at(0, 0, y, x) > 0.5 ? 1.0 : 0.0;
    };
    const double neutral = take_max ? 0.0 : 1.0;
    // horizontal pass
    std::vector<double> tmp(static_cast<size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double v = neutral;
            for (int k = -width; k <= width; ++k) {
                const double f = fg(y, x + k);
                v = take_max ? std::max(v, f) : std::min(v, f);
            }
            tmp[static_cast<size_t>(y) * W + x] = v;
        }
    Tensor out(1, 1, H, W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double v = neutral;
            for (int k = -width; k <= width; ++k) {
                const int yy = y + k;
                const double f = (yy < 0 || yy >= H) ? 0.0 : tmp[static_cast<size_t>(yy) * W + x];
                v = take_max ? std::max(v, f) : std::min(v, f);
            }
            out.at(0, 0, y, x) = v;
        }
    return out;
}

}  // namespace

Tensor dilate(const Tensor& mask, int width) { return morph(mask, width, true); }
Tensor erode(const Tensor& mask, int width) { return morph(mask, width, false); }

int connected_components(const Tensor& mask, std::vector<int>* labels) {
    require_plane(mask, "connected_components");
    const int H = mask.h(), W = mask.w();
    std::vector<int> lab(static_cast<size_t>(H) * W, 0);
    int count = 0;
    std::vector<int> stack;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const size_t i = static_cast<size_t>(y) * W + x;
            if (mask[i] <= 0.5 || lab[i] != 0) continue;
            ++count;
            lab[i] = count;
            stack.push_back(static_cast<int>(i));
            while (!stack.empty()) {
                const int p = stack.back();
                stack.pop_back();
                const int py = p / W, px = p % W;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        const int qy = py + dy, qx = px + dx;
                        if (qy < 0 || qy >= H || qx < 0 || qx >= W) continue;
                        const size_t q = static_cast<size_t>(qy) * W + qx;
                        if (mask[q] > 0.5 && lab[q] == 0) {
                            lab[q] = count;
                            stack.push_back(static_cast<int>(q));
                        }
                    }
            }
        }
    if (labels) *labels = std::move(lab);
    return count;
}

std::vector<double> gaussian_taps(int radius, double sigma) {
    if (radius < 0 || sigma <= 0.0) throw std::invalid_argument("gaussian_taps: bad parameters");
    std::vector<double> g(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        g[static_cast<size_t>(i + radius)] = std::exp(-(static_cast<double>(i) * i) /
                                                      (2.0 * sigma * sigma));
        sum += g[static_cast<size_t>(i + radius)];
    }
    for (auto& v : g) v /= sum;
    return g;
}

Tensor gaussian_blur(const Tensor& x, int radius, double sigma) {
    require_plane(x, "gaussian_blur");
    const auto g = gaussian_taps(radius, sigma);
    const int H = x.h(), W = x.w();
    Tensor tmp(1, 1, H, W), out(1, 1, H, W);
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int c = xx + k;
                if (c >= 0 && c < W) acc += g[static_cast<size_t>(k + radius)] * x.at(0, 0, y, c);
            }
            tmp.at(0, 0, y, xx) = acc;
        }
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int r = y + k;
                if (r >= 0 && r < H) acc += g[static_cast<size_t>(k + radius)] * tmp.at(0, 0, r, xx);
            }
            out.at(0, 0, y, xx) = acc;
        }
    return out;
}

DistanceField distance_transform(const Tensor& mask) {
    require_plane(mask, "distance_transform");
    const int H = mask.h(), W = mask.w();
    const double INF = std::numeric_limits<double>::infinity();
    DistanceField f;
    f.dist.assign(static_cast<size_t>(H) * W, INF);
    f.nearest.assign(static_cast<size_t>(H) * W, -1);

    // nearest foreground row per column (ties -> smaller row)
    std::vector<int> col_row(static_cast<size_t>(H) * W, -1);
    for (int x = 0; x < W; ++x) {
        std::vector<int> rows;
        for (int y = 0; y < H; ++y)
            if (mask.at(0, 0, y, x) > 0.5) rows.push_back(y);
        if (rows.empty()) continue;
        size_t j = 0;
        for (int y = 0; y < H; ++y) {
            while (j + 1 < rows.size() &&
                   std::abs(rows[j + 1] - y) < std::abs(rows[j] - y))
                ++j;
            // j is the first row index achieving the minimum |rows[j]-y|
            col_row[static_cast<size_t>(y) * W + x] = rows[j];
        }
    }
    // combine across columns; ties -> smaller column (then the smaller row
    // already chosen per column), i.e. lexicographic (d², x, y)
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            long best = -1;
            int bx = -1, by = -1;
            for (int xc = 0; xc < W; ++xc) {
                const int yr = col_row[static_cast<size_t>(y) * W + xc];
                if (yr < 0) continue;
                const long d2 = static_cast<long>(yr - y) * (yr - y) +
                                static_cast<long>(xc - x) * (xc - x);
                if (best < 0 || d2 < best) {
                    best = d2;
                    bx = xc;
                    by = yr;
                }
            }
            const size_t i = static_cast<size_t>(y) * W + x;
            if (best >= 0) {
                f.dist[i] = std::sqrt(static_cast<double>(best));
                f.nearest[i] = by * W + bx;
            }
        }
    return f;
}

bool centroid(const Tensor& mask, double* cx, double* cy) {
    require_plane(mask, "centroid");
    double sx = 0.0, sy = 0.0, m = 0.0;
    for (int y = 0; y < mask.h(); ++y)
        for (int x = 0; x < mask.w(); ++x)
            if (mask.at(0, 0, y, x) > 0.5) {
                sx += x;
                sy += y;
                m += 1.0;
            }
    if (m == 0.0) return false;
    *cx = sx / m;
    *cy = sy / m;
    return true;
}

}  // namespace dsal
