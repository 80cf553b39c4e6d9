#pragma once

#include <string>

#include "diffem/tensor.hpp"

namespace diffem {

// Tensor file format "RTF1": magic bytes "RTF1", three u32 little-endian dims
// (H, W, C), then H*W*C f64 little-endian row-major. Kernels use C = 1.
void write_rtf1(const std::string& path, const ImageTensor& image);
ImageTensor read_rtf1(const std::string& path);

void write_kernel_rtf1(const std::string& path, const BlurKernel& kernel);
BlurKernel read_kernel_rtf1(const std::string& path);

// 8-bit PNG (gray or RGB); intensities map to/from [0,1] by /255. Writing
// clamps to [0,1].
void write_png(const std::string& path, const ImageTensor& image);
ImageTensor read_png(const std::string& path);

bool has_png_extension(const std::string& path);
/// Reads RTF1 or PNG based on the file extension.
ImageTensor read_image(const std::string& path);

}  // namespace diffem
