#ifndef DSAL_PNG_IO_HPP
#define DSAL_PNG_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dsal/tensor.hpp"

namespace dsal {

// 8-bit grayscale (or color collapsed by the caller) scaled to [0,1]
Tensor read_png_gray(const std::string& path);

// 8-bit RGB scaled to [0,1]; grayscale files are replicated to 3 channels
Tensor read_png_rgb(const std::string& path);

// 16-bit single-channel PNG returned as raw integer values (0..65535);
// 8-bit files are accepted and returned as 0..255
Tensor read_png_ids(const std::string& path);

// values clamped to [0,1] and quantized to 0..255
void write_png_gray(const std::string& path, const Tensor& img);

// raw integer values 0..65535 as a 16-bit grayscale PNG
void write_png_ids(const std::string& path, const Tensor& ids);

}  // namespace dsal

#endif
