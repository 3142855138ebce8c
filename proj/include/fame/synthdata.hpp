#pragma once

#include <string>
#include <vector>

#include "fame/rng.hpp"
#include "fame/tensor.hpp"

namespace fame {

enum class Compression { none, hq, lq };
enum class Split { train, test };

const char* compression_name(Compression c);
Compression compression_from_name(const std::string& s);
const char* split_name(Split s);
Split split_from_name(const std::string& s);

// Ordered frame sequence with attribution label and provenance. Pixels are
// plane-ordered [T][C][H][W] doubles in [0, 1].
struct Clip {
    int frames = 0;
    int channels = 3;
    int height = 0;
    int width = 0;
    std::vector<double> pixels;
    int label = -1;
    int family = -1;
    Compression compression = Compression::none;
    std::uint64_t seed = 0;

    double& at(int t, int c, int y, int x) {
        return pixels[static_cast<std::size_t>(((t * channels + c) * height + y) * width + x)];
    }
    double at(int t, int c, int y, int x) const {
        return pixels[static_cast<std::size_t>(((t * channels + c) * height + y) * width + x)];
    }
    double* frame_plane(int t, int c) {
        return pixels.data() + static_cast<std::size_t>((t * channels + c) * height) * width;
    }
    const double* frame_plane(int t, int c) const {
        return pixels.data() + static_cast<std::size_t>((t * channels + c) * height) * width;
    }
};

constexpr int kFamilyCount = 5;

struct DatasetSpec {
    int classes = 5;
    int clips_per_class = 20;
    int frames = 10;
    int size = 32;
    double train_fraction = 0.8;
    double frac_hq = 0.0;  // remainder of the compression mix is uncompressed
    double frac_lq = 0.0;
    double strength = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::string canonical_text() const;  // hashed into artifacts
};

struct ManifestRecord {
    std::string id;
    std::string dir;  // relative to the dataset root
    int label = 0;
    int family = 0;
    Compression compression = Compression::none;
    Split split = Split::train;
    std::uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
    std::uint64_t seed = 0;
    std::string config_hash;

    std::vector<ManifestRecord> split_records(Split s) const;
    int class_count() const;
};

// Smooth seeded "face-like" content: skin-tone gradient, two dark ellipses,
// a horizontal mouth bar, low-frequency bumps, small per-frame jitter.
Clip make_base_clip(Rng& rng, int frames, int size);

// Simulated decoder round trip for one of the five families; fingerprint
// kernels are fixed constants per family. Blends with the original at the
// given strength in (0, 1].
Clip apply_decoder_family(const Clip& clip, int family, double strength);

// none = identity; hq/lq = 8x8 blockwise DCT quantization per channel with a
// quality-scaled table, clamped back to [0, 1].
Clip apply_compression(const Clip& clip, Compression level);

// Fully deterministic generation from (spec, record seed).
Clip synthesize_record(const DatasetSpec& spec, const ManifestRecord& rec);

// Materializes PPM frames under out_dir and writes manifest.tsv.
DatasetManifest generate_dataset(const DatasetSpec& spec, const std::string& out_dir);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

void write_clip(const Clip& clip, const std::string& dir);
Clip load_clip(const std::string& dir);

// [T, C, H, W] tensor; normalize maps x -> (x - 0.5) / 0.5.
Tensor clip_to_tensor(const Clip& clip, Dtype dt, bool normalize);

}  // namespace fame
