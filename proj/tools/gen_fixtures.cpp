// regenerates the synthetic fixtures committed under data/fixtures/: a
// 3-image dataset-construction set (instance grids + fixation log) and 8
// tiny training pairs. Deterministic, so reruns reproduce the tree bit-exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "dsal/common.hpp"
#include "dsal/png_io.hpp"
#include "dsal/tensor.hpp"

namespace fs = std::filesystem;
using namespace dsal;

namespace {

void fill_rect(Tensor& t, int x0, int x1, int y0, int y1, double v) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) t.at(0, 0, y, x) = v;
}

void write_build_set(const fs::path& root) {
    const int H = 48, W = 64;
    fs::create_directories(root / "ids");

    // two cars, a person, road below
    Tensor a = Tensor::zeros(1, 1, H, W);
    fill_rect(a, 0, W, 40, 48, 7);        // road (stuff)
    fill_rect(a, 8, 20, 30, 40, 26001);   // car, fixated hard
    fill_rect(a, 40, 56, 28, 40, 26002);  // car, barely looked at
    fill_rect(a, 30, 34, 22, 40, 24001);  // person
    write_png_ids((root / "ids" / "city_a.png").string(), a);

    // one bus under a building strip
    Tensor b = Tensor::zeros(1, 1, H, W);
    fill_rect(b, 0, W, 0, 12, 11);        // building (stuff)
    fill_rect(b, 16, 48, 12, 36, 28001);  // bus
    write_png_ids((root / "ids" / "city_b.png").string(), b);

    // nothing ever fixated: ground truth must come out empty
    Tensor c = Tensor::zeros(1, 1, H, W);
    fill_rect(c, 0, W, 0, 20, 11);   // building
    fill_rect(c, 0, 10, 20, 48, 21); // vegetation
    write_png_ids((root / "ids" / "city_c.png").string(), c);

    std::ofstream csv((root / "fixations.csv").string());
    csv << "image_id,x,y,duration_ms\n"
        << "city_a,14,35,400\n"
        << "city_a,15,34,300\n"
        << "city_a,32,30,150\n"
        << "city_a,5,44,60\n"
        << "city_a,-3,10,100\n"  // off the grid: parsers must drop and count it
        << "city_b,30,22,500\n"
        << "city_b,34,25,250\n";
}

void write_train_set(const fs::path& root) {
    const int H = 32, W = 64, N = 8;
    fs::create_directories(root / "images");
    fs::create_directories(root / "masks");
    Rng rng(77);
    for (int k = 0; k < N; ++k) {
        Tensor img(1, 1, H, W);
        Tensor mask = Tensor::zeros(1, 1, H, W);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                img.at(0, 0, y, x) = 0.1 + 0.15 * rng.uniform();
        const int bh = H / 4 + static_cast<int>(rng.below(H / 4));
        const int bw = W / 4 + static_cast<int>(rng.below(W / 4));
        const int y0 = static_cast<int>(rng.below(H - bh));
        const int x0 = static_cast<int>(rng.below(W - bw));
        for (int y = y0; y < y0 + bh; ++y)
            for (int x = x0; x < x0 + bw; ++x) {
                img.at(0, 0, y, x) = 0.85 + 0.1 * rng.uniform();
                mask.at(0, 0, y, x) = 1.0;
            }
        char name[32];
        snprintf(name, sizeof(name), "pair_%02d.png", k);
        write_png_gray((root / "images" / name).string(), img);
        write_png_gray((root / "masks" / name).string(), mask);
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_fixtures <output-root>\n");
        return 2;
    }
    const fs::path root(argv[1]);
    write_build_set(root / "build");
    write_train_set(root / "train");
    std::printf("fixtures written under %s\n", root.string().c_str());
    return 0;
}
