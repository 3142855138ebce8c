#pragma once

#include <string>
#include <vector>

namespace fame {

// Binary-portable pixmap I/O. Frames are written as P6 (RGB, maxval 255),
// heatmaps as P5 grayscale. Buffers are plane-ordered [C][H][W] doubles in
// [0, 1]; writing quantizes with round(v * 255).

void write_ppm(const std::string& path, const std::vector<double>& planes, int channels, int h,
               int w);
std::vector<double> read_ppm(const std::string& path, int* channels, int* h, int* w);

void write_pgm(const std::string& path, const std::vector<double>& plane, int h, int w);

}  // namespace fame
