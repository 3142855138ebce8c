#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fame/model.hpp"

namespace fame {

// Binary checkpoint: magic "FAME\x01", length-prefixed UTF-8 config block,
// then per-tensor records (name, rank, dims, little-endian f64 data).
// Tensors are stored as 64-bit floats regardless of runtime precision so
// round-trips are lossless; save(load(x)) is byte-identical.
struct Checkpoint {
    FameConfig config;
    std::uint64_t seed = 0;
    std::int64_t epoch = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;  // parameters then buffers
    bool has_optimizer = false;
    std::int64_t opt_step = 0;
    std::vector<std::pair<std::string, Tensor>> opt_tensors;
};

Checkpoint checkpoint_from_model(FameModel& model, std::uint64_t seed, std::int64_t epoch);
FameModel model_from_checkpoint(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fame
