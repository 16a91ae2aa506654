#include "dsal/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "dsal/common.hpp"

namespace dsal {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// decode to 8- or 16-bit rows, expanding palettes and stripping alpha
std::vector<std::vector<png_byte>> read_rows(const std::string& path, int* width, int* height,
                                             int* channels, int* bit_depth,
                                             bool keep_16bit) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open png: " + path);
    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8))
        throw DataError("not a png file: " + path);

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw DataError("png reader allocation failed");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw DataError("png info allocation failed");
    if (setjmp(png_jmpbuf(r.png))) throw DataError("corrupt png: " + path);

    png_init_io(r.png, fp.get());
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    png_set_strip_alpha(r.png);
    if (!keep_16bit) png_set_strip_16(r.png);
    png_read_update_info(r.png, r.info);

    *width = static_cast<int>(png_get_image_width(r.png, r.info));
    *height = static_cast<int>(png_get_image_height(r.png, r.info));
    *channels = png_get_channels(r.png, r.info);
    *bit_depth = png_get_bit_depth(r.png, r.info);

    std::vector<std::vector<png_byte>> rows(static_cast<size_t>(*height));
    const size_t rowbytes = png_get_rowbytes(r.png, r.info);
    std::vector<png_bytep> rowptrs(static_cast<size_t>(*height));
    for (int y = 0; y < *height; ++y) {
        rows[static_cast<size_t>(y)].resize(rowbytes);
        rowptrs[static_cast<size_t>(y)] = rows[static_cast<size_t>(y)].data();
    }
    png_read_image(r.png, rowptrs.data());
    png_read_end(r.png, nullptr);
    return rows;
}

}  // namespace

Tensor read_png_gray(const std::string& path) {
    int w, h, ch, depth;
    auto rows = read_rows(path, &w, &h, &ch, &depth, false);
    Tensor out(1, 1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const png_byte* p = rows[static_cast<size_t>(y)].data() + static_cast<size_t>(x) * ch;
            double v;
            if (ch >= 3)
                v = (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
            else
                v = p[0];
            out.at(0, 0, y, x) = v / 255.0;
        }
    return out;
}

Tensor read_png_rgb(const std::string& path) {
    int w, h, ch, depth;
    auto rows = read_rows(path, &w, &h, &ch, &depth, false);
    Tensor out(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const png_byte* p = rows[static_cast<size_t>(y)].data() + static_cast<size_t>(x) * ch;
            for (int c = 0; c < 3; ++c)
                out.at(0, c, y, x) = (ch >= 3 ? p[c] : p[0]) / 255.0;
        }
    return out;
}

Tensor read_png_ids(const std::string& path) {
    int w, h, ch, depth;
    auto rows = read_rows(path, &w, &h, &ch, &depth, true);
    if (ch != 1) throw DataError("expected single-channel id png: " + path);
    Tensor out(1, 1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (depth == 16) {
                // png stores 16-bit samples big-endian
                const png_byte* p =
                    rows[static_cast<size_t>(y)].data() + static_cast<size_t>(x) * 2;
                out.at(0, 0, y, x) = static_cast<double>((p[0] << 8) | p[1]);
            } else {
                out.at(0, 0, y, x) = static_cast<double>(rows[static_cast<size_t>(y)][x]);
            }
        }
    return out;
}

namespace {

void write_rows(const std::string& path, int width, int height, int bit_depth,
                const std::vector<std::vector<png_byte>>& rows) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot write png: " + path);
    PngWriter wr;
    wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!wr.png) throw DataError("png writer allocation failed");
    wr.info = png_create_info_struct(wr.png);
    if (!wr.info) throw DataError("png info allocation failed");
    if (setjmp(png_jmpbuf(wr.png))) throw DataError("png write failed: " + path);
    png_init_io(wr.png, fp.get());
    png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(wr.png, wr.info);
    for (const auto& row : rows)
        png_write_row(wr.png, const_cast<png_bytep>(row.data()));
    png_write_end(wr.png, nullptr);
}

}  // namespace

void write_png_gray(const std::string& path, const Tensor& img) {
    if (img.n() != 1 || img.c() != 1)
        throw std::invalid_argument("write_png_gray: expected (1,1,H,W), got " + img.shape_str());
    std::vector<std::vector<png_byte>> rows(static_cast<size_t>(img.h()));
    for (int y = 0; y < img.h(); ++y) {
        rows[static_cast<size_t>(y)].resize(static_cast<size_t>(img.w()));
        for (int x = 0; x < img.w(); ++x) {
            double v = img.at(0, 0, y, x);
            v = std::min(1.0, std::max(0.0, v));
            rows[static_cast<size_t>(y)][x] = static_cast<png_byte>(std::lround(v * 255.0));
        }
    }
    write_rows(path, img.w(), img.h(), 8, rows);
}

void write_png_ids(const std::string& path, const Tensor& ids) {
    if (ids.n() != 1 || ids.c() != 1)
        throw std::invalid_argument("write_png_ids: expected (1,1,H,W), got " + ids.shape_str());
    std::vector<std::vector<png_byte>> rows(static_cast<size_t>(ids.h()));
    for (int y = 0; y < ids.h(); ++y) {
        rows[static_cast<size_t>(y)].resize(static_cast<size_t>(ids.w()) * 2);
        for (int x = 0; x < ids.w(); ++x) {
            double v = ids.at(0, 0, y, x);
            if (v < 0 || v > 65535.0)
                throw std::invalid_argument("write_png_ids: value out of 16-bit range");
            const auto u = static_cast<std::uint16_t>(std::lround(v));
            rows[static_cast<size_t>(y)][static_cast<size_t>(x) * 2] =
                static_cast<png_byte>(u >> 8);
            rows[static_cast<size_t>(y)][static_cast<size_t>(x) * 2 + 1] =
                static_cast<png_byte>(u & 0xff);
        }
    }
    write_rows(path, ids.w(), ids.h(), 16, rows);
}

}  // namespace dsal
