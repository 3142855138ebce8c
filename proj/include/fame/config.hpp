#pragma once

#include <string>

#include "fame/model.hpp"
#include "fame/synthdata.hpp"
#include "fame/training.hpp"

namespace fame {

struct RunConfig {
    FameConfig model;
    TrainConfig train;
    DatasetSpec data;
    std::uint64_t seed = 0;

    // Canonical key=value serialization (sorted keys); its FNV hash is the
    // config hash embedded in artifacts.
    std::string canonical_text() const;
    std::string config_hash() const;
};

// Line-based `key = value` syntax with `#` comments and dotted section keys
// (model.*, train.*, data.*, plus a top-level `seed` applied to both the
// training and data seeds unless those are set explicitly). Unknown keys and
// type mismatches are rejected with the offending line number. Unset keys
// keep their defaults.
RunConfig parse_config(const std::string& text);

RunConfig load_config_file(const std::string& path);

std::string temporal_mode_name(TemporalMode m);
TemporalMode temporal_mode_from_name(const std::string& s);
std::string stages_to_string(const std::vector<std::vector<int>>& stages);
std::vector<std::vector<int>> stages_from_string(const std::string& s);

}  // namespace fame
