#pragma once

#include <vector>

namespace fame {

// Single-plane resampling helpers on row-major double buffers. Sampling uses
// pixel-center alignment; bilinear clamps at borders.

void resize_bilinear_plane(const double* src, int sh, int sw, double* dst, int dh, int dw);
void resize_nearest_plane(const double* src, int sh, int sw, double* dst, int dh, int dw);

// 3x3 convolution with edge replication; kernel is row-major.
void conv3x3_plane(const double* src, int h, int w, const double kernel[9], double* dst);

// Transposed-conv style 2x upsample: zero-stuff then 3x3 kernel. Uneven phase
// gains are what make the checkerboard fingerprint.
void upsample2x_kernel_plane(const double* src, int sh, int sw, const double kernel[9],
                             double* dst);

}  // namespace fame
