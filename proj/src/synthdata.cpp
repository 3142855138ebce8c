#include "fame/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fame/error.hpp"
#include "fame/image.hpp"
#include "fame/ppm.hpp"
#include "fame/util.hpp"

namespace fame {

namespace fs = std::filesystem;

const char* compression_name(Compression c) {
    switch (c) {
        case Compression::none: return "none";
        case Compression::hq: return "hq";
        case Compression::lq: return "lq";
    }
    return "none";
}

Compression compression_from_name(const std::string& s) {
    if (s == "none") return Compression::none;
    if (s == "hq") return Compression::hq;
    if (s == "lq") return Compression::lq;
    throw DataError("unknown compression level: " + s);
}

const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_name(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw DataError("unknown split: " + s);
}

void DatasetSpec::validate() const {
    if (classes < 2 || classes > kFamilyCount) {
        throw ConfigError("dataset: classes must be in [2, " + std::to_string(kFamilyCount) + "]");
    }
    if (clips_per_class < 2) throw ConfigError("dataset: need at least 2 clips per class");
    if (frames < 1) throw ConfigError("dataset: frames must be >= 1");
    if (size < 16) throw ConfigError("dataset: size must be >= 16");
    if (train_fraction <= 0.0 || train_fraction >= 1.0) {
        throw ConfigError("dataset: train_fraction must be in (0, 1)");
    }
    if (frac_hq < 0.0 || frac_lq < 0.0 || frac_hq + frac_lq > 1.0) {
        throw ConfigError("dataset: compression fractions must be non-negative and sum <= 1");
    }
    if (strength <= 0.0 || strength > 1.0) throw ConfigError("dataset: strength must be in (0, 1]");
}

std::string DatasetSpec::canonical_text() const {
    std::ostringstream os;
    os << "classes=" << classes << "\nclips_per_class=" << clips_per_class
       << "\nframes=" << frames << "\nsize=" << size
       << "\ntrain_fraction=" << format_double(train_fraction) << "\nfrac_hq="
       << format_double(frac_hq) << "\nfrac_lq=" << format_double(frac_lq)
       << "\nstrength=" << format_double(strength) << "\nseed=" << seed << "\n";
    return os.str();
}

std::vector<ManifestRecord> DatasetManifest::split_records(Split s) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(r);
    }
    return out;
}

int DatasetManifest::class_count() const {
    int k = 0;
    for (const auto& r : records) k = std::max(k, r.label + 1);
    return k;
}

// ------------------------------------------------------------ base content

namespace {

struct Blob {
    double cx, cy, sx, sy, amp;  // center/sigma in pixels, per-channel scale below
    double cr, cg, cb;
};

}  // namespace

Clip make_base_clip(Rng& rng, int frames, int size) {
    if (size < 16) throw ContractError("make_base_clip: size must be >= 16");
    if (frames < 1) throw ContractError("make_base_clip: frames must be >= 1");
    Clip clip;
    clip.frames = frames;
    clip.height = clip.width = size;
    clip.pixels.assign(static_cast<std::size_t>(frames) * 3 * size * size, 0.0);
    clip.seed = rng.seed();

    const double s = static_cast<double>(size);
    // skin-tone base with a seeded shading gradient
    const double base_r = 0.78 + rng.uniform(-0.05, 0.05);
    const double base_g = 0.60 + rng.uniform(-0.05, 0.05);
    const double base_b = 0.48 + rng.uniform(-0.05, 0.05);
    const double grad_x = rng.uniform(-0.08, 0.08);
    const double grad_y = rng.uniform(-0.08, 0.08);

    std::vector<Blob> blobs;
    for (int i = 0; i < 3; ++i) {  // low-frequency bumps
        Blob b;
        b.cx = rng.uniform(0.1, 0.9) * s;
        b.cy = rng.uniform(0.1, 0.9) * s;
        b.sx = rng.uniform(0.18, 0.4) * s;
        b.sy = rng.uniform(0.18, 0.4) * s;
        b.amp = rng.uniform(-0.06, 0.06);
        b.cr = b.cg = b.cb = 1.0;
        blobs.push_back(b);
    }
    const double eye_dx = rng.uniform(-0.02, 0.02);
    const double eye_y = (0.38 + rng.uniform(-0.02, 0.02)) * s;
    Blob eye_l{(0.35 + eye_dx) * s, eye_y, 0.06 * s, 0.045 * s, -0.35, 1.0, 0.95, 0.9};
    Blob eye_r{(0.65 + eye_dx) * s, eye_y, 0.06 * s, 0.045 * s, -0.35, 1.0, 0.95, 0.9};
    Blob mouth{0.5 * s, (0.68 + rng.uniform(-0.02, 0.02)) * s, 0.14 * s, 0.03 * s, -0.25,
               0.9, 1.0, 1.0};
    blobs.push_back(eye_l);
    blobs.push_back(eye_r);
    blobs.push_back(mouth);

    double ox = 0.0, oy = 0.0, glow = 0.0;
    for (int t = 0; t < frames; ++t) {
        if (t > 0) {  // small random-walk jitter keeps frames coherent
            ox = std::clamp(ox + rng.normal() * 0.4, -2.0, 2.0);
            oy = std::clamp(oy + rng.normal() * 0.4, -2.0, 2.0);
            glow = std::clamp(glow + rng.normal() * 0.004, -0.01, 0.01);
        }
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const double px = x - ox;
                const double py = y - oy;
                double bump = 0.0;
                double fr = 0.0, fg = 0.0, fb = 0.0;
                for (const Blob& b : blobs) {
                    const double dx = (px - b.cx) / b.sx;
                    const double dy = (py - b.cy) / b.sy;
                    const double g = b.amp * std::exp(-0.5 * (dx * dx + dy * dy));
                    fr += g * b.cr;
                    fg += g * b.cg;
                    fb += g * b.cb;
                }
                bump = grad_x * (px / s - 0.5) + grad_y * (py / s - 0.5) + glow;
                clip.at(t, 0, y, x) = std::clamp(base_r + bump + fr, 0.0, 1.0);
                clip.at(t, 1, y, x) = std::clamp(base_g + bump + fg, 0.0, 1.0);
                clip.at(t, 2, y, x) = std::clamp(base_b + bump + fb, 0.0, 1.0);
            }
        }
    }
    return clip;
}

// ------------------------------------------------------- decoder fingerprints

namespace {

// Bilinear-ish smooth upsample kernel (balanced phases).
constexpr double kSmoothKernel[9] = {0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25};
// Intentionally unbalanced transposed-conv kernel: phase gains 1.0 / 0.8 /
// 0.8 / 0.4 imprint a period-2 checkerboard.
constexpr double kCheckerKernel[9] = {0.1, 0.4, 0.1, 0.4, 1.0, 0.4, 0.1, 0.4, 0.1};
constexpr double kBlurKernel[9] = {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16,
                                   2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};

void round_trip_plane(std::vector<double>& plane, int size, int work, bool nearest,
                      const double* up_kernel) {
    std::vector<double> small(static_cast<std::size_t>(work) * work);
    std::vector<double> back(static_cast<std::size_t>(size) * size);
    if (nearest) {
        resize_nearest_plane(plane.data(), size, size, small.data(), work, work);
    } else {
        resize_bilinear_plane(plane.data(), size, size, small.data(), work, work);
    }
    if (up_kernel != nullptr && work * 2 == size) {
        upsample2x_kernel_plane(small.data(), work, work, up_kernel, back.data());
    } else if (nearest) {
        resize_nearest_plane(small.data(), work, work, back.data(), size, size);
    } else {
        resize_bilinear_plane(small.data(), work, work, back.data(), size, size);
    }
    plane = back;
}

}  // namespace

Clip apply_decoder_family(const Clip& clip, int family, double strength) {
    if (family < 0 || family >= kFamilyCount) {
        throw ContractError("apply_decoder_family: unknown family " + std::to_string(family));
    }
    if (strength <= 0.0 || strength > 1.0) {
        throw ContractError("apply_decoder_family: strength must be in (0, 1]");
    }
    Clip out = clip;
    out.family = family;
    const int size = clip.width;
    const int half = size / 2;
    const int three_quarter = (3 * size) / 4;

    for (int t = 0; t < clip.frames; ++t) {
        std::vector<double> fx[3];
        for (int c = 0; c < 3; ++c) {
            fx[c].assign(clip.frame_plane(t, c), clip.frame_plane(t, c) + size * size);
        }
        switch (family) {
            case 0:  // half-res round trips, smooth upsampling
                for (int cyc = 0; cyc < 3; ++cyc) {
                    for (int c = 0; c < 3; ++c) round_trip_plane(fx[c], size, half, false, nullptr);
                }
                break;
            case 1:  // nearest-neighbour round trips leave 2x2 blockiness
                for (int cyc = 0; cyc < 3; ++cyc) {
                    for (int c = 0; c < 3; ++c) round_trip_plane(fx[c], size, half, true, nullptr);
                }
                break;
            case 2: {  // shared-layer variant: extra cycle plus channel crosstalk
                for (int cyc = 0; cyc < 4; ++cyc) {
                    for (int c = 0; c < 3; ++c) round_trip_plane(fx[c], size, half, false, nullptr);
                }
                std::vector<double> mixed(static_cast<std::size_t>(size) * size);
                const double mixm[3][3] = {{0.80, 0.14, 0.06}, {0.08, 0.84, 0.08}, {0.06, 0.14, 0.80}};
                for (int i = 0; i < size * size; ++i) {
                    const double r = fx[0][static_cast<std::size_t>(i)];
                    const double g = fx[1][static_cast<std::size_t>(i)];
                    const double b = fx[2][static_cast<std::size_t>(i)];
                    fx[0][static_cast<std::size_t>(i)] = mixm[0][0] * r + mixm[0][1] * g + mixm[0][2] * b;
                    fx[1][static_cast<std::size_t>(i)] = mixm[1][0] * r + mixm[1][1] * g + mixm[1][2] * b;
                    fx[2][static_cast<std::size_t>(i)] = mixm[2][0] * r + mixm[2][1] * g + mixm[2][2] * b;
                }
                for (int c = 0; c < 3; ++c) {
                    conv3x3_plane(fx[c].data(), size, size, kBlurKernel, mixed.data());
                    fx[c] = mixed;
                }
                break;
            }
            case 3: {  // transposed-conv checkerboard + residual smoothing
                std::vector<double> blurred(static_cast<std::size_t>(size) * size);
                for (int cyc = 0; cyc < 4; ++cyc) {
                    for (int c = 0; c < 3; ++c) {
                        round_trip_plane(fx[c], size, half, false, kCheckerKernel);
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    conv3x3_plane(fx[c].data(), size, size, kBlurKernel, blurred.data());
                    for (int i = 0; i < size * size; ++i) {
                        fx[c][static_cast<std::size_t>(i)] =
                            0.7 * fx[c][static_cast<std::size_t>(i)] + 0.3 * blurred[static_cast<std::size_t>(i)];
                    }
                }
                break;
            }
            case 4:  // doubled working resolution: milder 3/4-res trips
                for (int cyc = 0; cyc < 3; ++cyc) {
                    for (int c = 0; c < 3; ++c) {
                        round_trip_plane(fx[c], size, three_quarter, false, nullptr);
                    }
                }
                break;
        }
        for (int c = 0; c < 3; ++c) {
            double* dst = out.frame_plane(t, c);
            const double* orig = clip.frame_plane(t, c);
            for (int i = 0; i < size * size; ++i) {
                const double v = (1.0 - strength) * orig[i] + strength * fx[c][static_cast<std::size_t>(i)];
                dst[i] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

// ----------------------------------------------------------- DCT compression

namespace {

constexpr int kJpegLuma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                               14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                               18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                               49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

struct DctTables {
    double cosines[8][8];  // cosines[x][u] = cos((2x+1) u pi / 16)
    DctTables() {
        for (int x = 0; x < 8; ++x) {
            for (int u = 0; u < 8; ++u) {
                cosines[x][u] = std::cos((2.0 * x + 1.0) * u * 3.14159265358979323846 / 16.0);
            }
        }
    }
};

const DctTables& dct_tables() {
    static DctTables t;
    return t;
}

void quant_table(int quality, double* q) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    for (int i = 0; i < 64; ++i) {
        int v = (kJpegLuma[i] * scale + 50) / 100;
        v = std::clamp(v, 1, 255);
        q[i] = static_cast<double>(v);
    }
}

void compress_plane(std::vector<double>& plane, int h, int w, int quality) {
    const DctTables& tb = dct_tables();
    double q[64];
    quant_table(quality, q);
    const int ph = (h + 7) / 8 * 8;
    const int pw = (w + 7) / 8 * 8;
    std::vector<double> padded(static_cast<std::size_t>(ph) * pw);
    for (int y = 0; y < ph; ++y) {
        const int sy = std::min(y, h - 1);
        for (int x = 0; x < pw; ++x) {
            const int sx = std::min(x, w - 1);
            padded[static_cast<std::size_t>(y) * pw + x] = plane[static_cast<std::size_t>(sy) * w + sx] * 255.0 - 128.0;
        }
    }
    double block[64], coef[64];
    for (int by = 0; by < ph; by += 8) {
        for (int bx = 0; bx < pw; bx += 8) {
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    block[y * 8 + x] = padded[static_cast<std::size_t>(by + y) * pw + bx + x];
                }
            }
            // forward DCT-II
            for (int u = 0; u < 8; ++u) {
                for (int v = 0; v < 8; ++v) {
                    double acc = 0.0;
                    for (int y = 0; y < 8; ++y) {
                        for (int x = 0; x < 8; ++x) {
                            acc += block[y * 8 + x] * tb.cosines[y][u] * tb.cosines[x][v];
                        }
                    }
                    const double cu = u == 0 ? 0.3535533905932738 : 0.5;  // 1/sqrt(8), sqrt(2/8)... scaled below
                    const double cv = v == 0 ? 0.3535533905932738 : 0.5;
                    coef[u * 8 + v] = cu * cv * acc;
                }
            }
            for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / q[i]) * q[i];
            // inverse DCT
            for (int y = 0; y < 8; ++y) {
                for (int x = 0; x < 8; ++x) {
                    double acc = 0.0;
                    for (int u = 0; u < 8; ++u) {
                        for (int v = 0; v < 8; ++v) {
                            const double cu = u == 0 ? 0.3535533905932738 : 0.5;
                            const double cv = v == 0 ? 0.3535533905932738 : 0.5;
                            acc += cu * cv * coef[u * 8 + v] * tb.cosines[y][u] * tb.cosines[x][v];
                        }
                    }
                    padded[static_cast<std::size_t>(by + y) * pw + bx + x] = acc;
                }
            }
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            plane[static_cast<std::size_t>(y) * w + x] =
                std::clamp((padded[static_cast<std::size_t>(y) * pw + x] + 128.0) / 255.0, 0.0, 1.0);
        }
    }
}

}  // namespace

Clip apply_compression(const Clip& clip, Compression level) {
    Clip out = clip;
    out.compression = level;
    if (level == Compression::none) return out;
    const int quality = level == Compression::hq ? 85 : 25;
    for (int t = 0; t < clip.frames; ++t) {
        for (int c = 0; c < 3; ++c) {
            std::vector<double> plane(out.frame_plane(t, c),
                                      out.frame_plane(t, c) + clip.height * clip.width);
            compress_plane(plane, clip.height, clip.width, quality);
            std::copy(plane.begin(), plane.end(), out.frame_plane(t, c));
        }
    }
    return out;
}

// ----------------------------------------------------------------- dataset

Clip synthesize_record(const DatasetSpec& spec, const ManifestRecord& rec) {
    Rng rng(rec.seed);
    Clip clip = make_base_clip(rng, spec.frames, spec.size);
    clip = apply_decoder_family(clip, rec.family, spec.strength);
    clip = apply_compression(clip, rec.compression);
    clip.label = rec.label;
    clip.seed = rec.seed;
    return clip;
}

DatasetManifest generate_dataset(const DatasetSpec& spec, const std::string& out_dir) {
    spec.validate();
    DatasetManifest manifest;
    manifest.seed = spec.seed;
    manifest.config_hash = fnv1a64_hex(spec.canonical_text());

    const int n = spec.clips_per_class;
    int n_train = static_cast<int>(std::lround(n * spec.train_fraction));
    n_train = std::clamp(n_train, 1, n - 1);
    const int n_hq = static_cast<int>(std::lround(n * spec.frac_hq));
    const int n_lq = static_cast<int>(std::lround(n * spec.frac_lq));

    int next_id = 0;
    for (int k = 0; k < spec.classes; ++k) {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng split_rng(Rng::mix(spec.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(k)));
        split_rng.shuffle(order);
        for (int i = 0; i < n; ++i) {
            ManifestRecord rec;
            char idbuf[32];
            std::snprintf(idbuf, sizeof(idbuf), "clip_%05d", next_id++);
            rec.id = idbuf;
            rec.dir = rec.id;
            rec.label = k;
            rec.family = k;  // class identity is the decoder family
            rec.seed = Rng::mix(spec.seed, (static_cast<std::uint64_t>(k) << 32) |
                                               static_cast<std::uint64_t>(i));
            const int pos = order[static_cast<std::size_t>(i)];
            rec.split = pos < n_train ? Split::train : Split::test;
            if (pos < n_hq) {
                rec.compression = Compression::hq;
            } else if (pos < n_hq + n_lq) {
                rec.compression = Compression::lq;
            } else {
                rec.compression = Compression::none;
            }
            manifest.records.push_back(rec);
        }
    }

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        for (const auto& rec : manifest.records) {
            Clip clip = synthesize_record(spec, rec);
            write_clip(clip, (fs::path(out_dir) / rec.dir).string());
        }
        write_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
    }
    return manifest;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ostringstream os;
    os << "# fame dataset manifest\n";
    os << "# seed=" << m.seed << " config=" << m.config_hash << "\n";
    for (const auto& r : m.records) {
        os << r.id << "\t" << r.dir << "\t" << r.label << "\t" << r.family << "\t"
           << compression_name(r.compression) << "\t" << split_name(r.split) << "\t" << r.seed
           << "\n";
    }
    write_text_file(path, os.str());
}

DatasetManifest read_manifest(const std::string& path) {
    DatasetManifest m;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto seed_pos = line.find("seed=");
            if (seed_pos != std::string::npos) {
                m.seed = std::strtoull(line.c_str() + seed_pos + 5, nullptr, 10);
            }
            const auto cfg_pos = line.find("config=");
            if (cfg_pos != std::string::npos) {
                m.config_hash = trim_str(line.substr(cfg_pos + 7));
            }
            continue;
        }
        const auto cols = split_str(line, '\t');
        if (cols.size() != 7) {
            throw DataError("manifest line " + std::to_string(lineno) + ": expected 7 columns");
        }
        ManifestRecord r;
        r.id = cols[0];
        r.dir = cols[1];
        r.label = std::stoi(cols[2]);
        r.family = std::stoi(cols[3]);
        r.compression = compression_from_name(cols[4]);
        r.split = split_from_name(cols[5]);
        r.seed = std::strtoull(cols[6].c_str(), nullptr, 10);
        m.records.push_back(r);
    }
    if (m.records.empty()) throw DataError("manifest has no records: " + path);
    return m;
}

void write_clip(const Clip& clip, const std::string& dir) {
    fs::create_directories(dir);
    for (int t = 0; t < clip.frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d.ppm", t);
        std::vector<double> planes(static_cast<std::size_t>(3) * clip.height * clip.width);
        for (int c = 0; c < 3; ++c) {
            std::copy(clip.frame_plane(t, c), clip.frame_plane(t, c) + clip.height * clip.width,
                      planes.begin() + static_cast<std::size_t>(c) * clip.height * clip.width);
        }
        write_ppm((fs::path(dir) / name).string(), planes, 3, clip.height, clip.width);
    }
}

Clip load_clip(const std::string& dir) {
    std::vector<fs::path> frames;
    if (!fs::is_directory(dir)) throw DataError("clip directory not found: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ppm") frames.push_back(e.path());
    }
    if (frames.empty()) throw DataError("no frames in " + dir);
    std::sort(frames.begin(), frames.end());
    Clip clip;
    clip.frames = static_cast<int>(frames.size());
    for (int t = 0; t < clip.frames; ++t) {
        int c = 0, h = 0, w = 0;
        std::vector<double> planes = read_ppm(frames[static_cast<std::size_t>(t)].string(), &c, &h, &w);
        if (t == 0) {
            clip.height = h;
            clip.width = w;
            clip.pixels.assign(static_cast<std::size_t>(clip.frames) * 3 * h * w, 0.0);
        } else if (h != clip.height || w != clip.width) {
            throw DataError("inconsistent frame sizes in " + dir);
        }
        std::copy(planes.begin(), planes.end(),
                  clip.pixels.begin() + static_cast<std::size_t>(t) * 3 * h * w);
    }
    return clip;
}

Tensor clip_to_tensor(const Clip& clip, Dtype dt, bool normalize) {
    Tensor t = Tensor::zeros(Shape{clip.frames, clip.channels, clip.height, clip.width}, dt);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        const double v = clip.pixels[static_cast<std::size_t>(i)];
        t.set_value(i, normalize ? (v - 0.5) / 0.5 : v);
    }
    return t;
}

}  // namespace fame
