#include "fame/image.hpp"

#include <algorithm>
#include <cmath>

namespace fame {

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}

void resize_bilinear_plane(const double* src, int sh, int sw, double* dst, int dh, int dw) {
    const double sy = static_cast<double>(sh) / dh;
    const double sx = static_cast<double>(sw) / dw;
    for (int y = 0; y < dh; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int y1 = clampi(y0 + 1, 0, sh - 1);
        y0 = clampi(y0, 0, sh - 1);
        for (int x = 0; x < dw; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int x1 = clampi(x0 + 1, 0, sw - 1);
            x0 = clampi(x0, 0, sw - 1);
            const double top = src[y0 * sw + x0] * (1.0 - wx) + src[y0 * sw + x1] * wx;
            const double bot = src[y1 * sw + x0] * (1.0 - wx) + src[y1 * sw + x1] * wx;
            dst[y * dw + x] = top * (1.0 - wy) + bot * wy;
        }
    }
}

void resize_nearest_plane(const double* src, int sh, int sw, double* dst, int dh, int dw) {
    for (int y = 0; y < dh; ++y) {
        const int sy = clampi(static_cast<int>((y + 0.5) * sh / dh), 0, sh - 1);
        for (int x = 0; x < dw; ++x) {
            const int sx = clampi(static_cast<int>((x + 0.5) * sw / dw), 0, sw - 1);
            dst[y * dw + x] = src[sy * sw + sx];
        }
    }
}

void conv3x3_plane(const double* src, int h, int w, const double kernel[9], double* dst) {
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int ky = -1; ky <= 1; ++ky) {
                const int sy = clampi(y + ky, 0, h - 1);
                for (int kx = -1; kx <= 1; ++kx) {
                    const int sx = clampi(x + kx, 0, w - 1);
                    acc += kernel[(ky + 1) * 3 + (kx + 1)] * src[sy * w + sx];
                }
            }
            dst[y * w + x] = acc;
        }
    }
}

void upsample2x_kernel_plane(const double* src, int sh, int sw, const double kernel[9],
                             double* dst) {
    const int dh = 2 * sh, dw = 2 * sw;
    std::fill(dst, dst + dh * dw, 0.0);
    // Gather form: output pixel collects from stuffed grid positions (even
    // coordinates hold source pixels, odd positions are zero).
    for (int y = 0; y < dh; ++y) {
        for (int x = 0; x < dw; ++x) {
            double acc = 0.0;
            for (int ky = -1; ky <= 1; ++ky) {
                const int yy = y + ky;
                if (yy < 0 || yy >= dh || (yy & 1)) continue;
                const int syy = yy >> 1;
                for (int kx = -1; kx <= 1; ++kx) {
                    const int xx = x + kx;
                    if (xx < 0 || xx >= dw || (xx & 1)) continue;
                    acc += kernel[(ky + 1) * 3 + (kx + 1)] * src[syy * sw + (xx >> 1)];
                }
            }
            dst[y * dw + x] = acc;
        }
    }
}

}  // namespace fame
