#pragma once

#include <string>

#include "dcdm/tensor.hpp"

namespace dcdm {

/// Write an [H,W,1] image with values in [-1,1] as 8-bit grayscale PNG.
void write_png_gray(const std::string& path, const Tensor& img);

/// Read an 8-bit grayscale PNG into an [H,W,1] tensor scaled to [-1,1].
Tensor read_png_gray(const std::string& path);

}  // namespace dcdm
