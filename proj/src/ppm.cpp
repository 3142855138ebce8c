#include "fame/ppm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "fame/error.hpp"

namespace fame {

namespace {

unsigned char quantize(double v) {
    const double scaled = std::round(v * 255.0);
    return static_cast<unsigned char>(scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled));
}

int read_pnm_int(std::istream& in) {
    int c = in.get();
    for (;;) {
        while (c == ' ' || c == '\t' || c == '\r' || c == '\n') c = in.get();
        if (c == '#') {
            while (c != '\n' && c != EOF) c = in.get();
            continue;
        }
        break;
    }
    int value = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw DataError("malformed PNM header");
    return value;
}

}  // namespace

void write_ppm(const std::string& path, const std::vector<double>& planes, int channels, int h,
               int w) {
    if (channels != 3) throw ContractError("write_ppm: P6 requires 3 channels");
    if (static_cast<int>(planes.size()) != channels * h * w) {
        throw DimensionError("write_ppm: buffer size mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
                    quantize(planes[static_cast<std::size_t>((c * h + y) * w + x)]);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<double> read_ppm(const std::string& path, int* channels, int* h, int* w) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || m1 != '6') throw DataError("not a P6 pixmap: " + path);
    const int width = read_pnm_int(in);
    const int height = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval != 255) throw DataError("unsupported maxval in " + path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError("truncated pixmap: " + path);
    }
    std::vector<double> planes(raw.size());
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                planes[static_cast<std::size_t>((c * height + y) * width + x)] =
                    raw[(static_cast<std::size_t>(y) * width + x) * 3 + static_cast<std::size_t>(c)] /
                    255.0;
            }
        }
    }
    *channels = 3;
    *h = height;
    *w = width;
    return planes;
}

void write_pgm(const std::string& path, const std::vector<double>& plane, int h, int w) {
    if (static_cast<int>(plane.size()) != h * w) throw DimensionError("write_pgm: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            row[static_cast<std::size_t>(x)] = quantize(plane[static_cast<std::size_t>(y) * w + x]);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace fame
