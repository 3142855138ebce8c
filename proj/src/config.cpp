#include "fame/config.hpp"

#include <cstdlib>
#include <sstream>

#include "fame/util.hpp"

namespace fame {

std::string temporal_mode_name(TemporalMode m) {
    switch (m) {
        case TemporalMode::none: return "none";
        case TemporalMode::gate: return "gate";
        case TemporalMode::softmax: return "softmax";
    }
    return "gate";
}

TemporalMode temporal_mode_from_name(const std::string& s) {
    if (s == "none") return TemporalMode::none;
    if (s == "gate") return TemporalMode::gate;
    if (s == "softmax") return TemporalMode::softmax;
    throw ConfigError("unknown temporal mode: " + s);
}

std::string stages_to_string(const std::vector<std::vector<int>>& stages) {
    std::ostringstream os;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        if (s) os << "/";
        for (std::size_t i = 0; i < stages[s].size(); ++i) {
            if (i) os << ",";
            os << stages[s][i];
        }
    }
    return os.str();
}

std::vector<std::vector<int>> stages_from_string(const std::string& s) {
    std::vector<std::vector<int>> stages;
    for (const std::string& stage_text : split_str(s, '/')) {
        std::vector<int> widths;
        for (const std::string& tok : split_str(stage_text, ',')) {
            const std::string t = trim_str(tok);
            if (t.empty()) throw ConfigError("bad stage list: " + s);
            char* end = nullptr;
            const long v = std::strtol(t.c_str(), &end, 10);
            if (end == nullptr || *end != '\0' || v < 1) {
                throw ConfigError("bad stage width: " + t);
            }
            widths.push_back(static_cast<int>(v));
        }
        stages.push_back(widths);
    }
    return stages;
}

std::string RunConfig::canonical_text() const {
    std::ostringstream os;
    os << "data.classes = " << data.classes << "\n";
    os << "data.clips_per_class = " << data.clips_per_class << "\n";
    os << "data.frac_hq = " << format_double(data.frac_hq) << "\n";
    os << "data.frac_lq = " << format_double(data.frac_lq) << "\n";
    os << "data.frames = " << data.frames << "\n";
    os << "data.seed = " << data.seed << "\n";
    os << "data.size = " << data.size << "\n";
    os << "data.strength = " << format_double(data.strength) << "\n";
    os << "data.train_fraction = " << format_double(data.train_fraction) << "\n";
    os << "model.channels = " << model.channels << "\n";
    os << "model.classes = " << model.classes << "\n";
    os << "model.dropout = " << format_double(model.dropout) << "\n";
    os << "model.frames = " << model.frames << "\n";
    os << "model.h_cell = " << model.h_cell << "\n";
    os << "model.input_size = " << model.input_size << "\n";
    os << "model.loss_alpha = " << format_double(model.loss_alpha) << "\n";
    os << "model.loss_beta = " << format_double(model.loss_beta) << "\n";
    os << "model.precision = " << dtype_name(model.precision) << "\n";
    os << "model.spatial_attention = " << (model.spatial_attention ? "true" : "false") << "\n";
    os << "model.spatial_hidden = " << model.spatial_hidden << "\n";
    os << "model.stages = " << stages_to_string(model.stages) << "\n";
    os << "model.temporal_mode = " << temporal_mode_name(model.temporal_mode) << "\n";
    os << "seed = " << seed << "\n";
    os << "train.adam_eps = " << format_double(train.adam_eps) << "\n";
    os << "train.augment_flip = " << (train.augment_flip ? "true" : "false") << "\n";
    os << "train.augment_temporal_crop = " << (train.augment_temporal_crop ? "true" : "false")
       << "\n";
    os << "train.batch_size = " << train.batch_size << "\n";
    os << "train.beta1 = " << format_double(train.beta1) << "\n";
    os << "train.beta2 = " << format_double(train.beta2) << "\n";
    os << "train.epochs = " << train.epochs << "\n";
    os << "train.lr = " << format_double(train.lr) << "\n";
    os << "train.lr_decay_every = " << train.lr_decay_every << "\n";
    os << "train.lr_decay_factor = " << format_double(train.lr_decay_factor) << "\n";
    os << "train.seed = " << train.seed << "\n";
    os << "train.weight_decay = " << format_double(train.weight_decay) << "\n";
    return os.str();
}

std::string RunConfig::config_hash() const { return fnv1a64_hex(canonical_text()); }

namespace {

struct Parser {
    int lineno = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(lineno) + ": " + msg);
    }

    long long parse_int(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const long long out = std::strtoll(v.c_str(), &end, 10);
        if (v.empty() || end == nullptr || *end != '\0') {
            fail("expected integer for '" + key + "', got '" + v + "'");
        }
        return out;
    }

    std::uint64_t parse_u64(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
        if (v.empty() || end == nullptr || *end != '\0' || v[0] == '-') {
            fail("expected unsigned integer for '" + key + "', got '" + v + "'");
        }
        return out;
    }

    double parse_float(const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const double out = std::strtod(v.c_str(), &end);
        if (v.empty() || end == nullptr || *end != '\0') {
            fail("expected number for '" + key + "', got '" + v + "'");
        }
        return out;
    }

    bool parse_bool(const std::string& key, const std::string& v) const {
        if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "off" || v == "no") return false;
        fail("expected boolean for '" + key + "', got '" + v + "'");
    }
};

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    bool train_seed_set = false, data_seed_set = false;
    Parser p;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++p.lineno;
        std::string line = raw;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_str(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected 'key = value'");
        const std::string key = trim_str(line.substr(0, eq));
        const std::string value = trim_str(line.substr(eq + 1));
        if (key.empty()) p.fail("missing key");
        if (value.empty()) p.fail("missing value for '" + key + "'");

        if (key == "model.input_size") cfg.model.input_size = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.channels") cfg.model.channels = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.frames") cfg.model.frames = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.stages") {
            try {
                cfg.model.stages = stages_from_string(value);
            } catch (const ConfigError& e) {
                p.fail(e.what());
            }
        }
        else if (key == "model.h_cell") cfg.model.h_cell = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.spatial_hidden") cfg.model.spatial_hidden = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.spatial_attention") cfg.model.spatial_attention = p.parse_bool(key, value);
        else if (key == "model.temporal_mode") {
            try {
                cfg.model.temporal_mode = temporal_mode_from_name(value);
            } catch (const ConfigError& e) {
                p.fail(e.what());
            }
        }
        else if (key == "model.classes") cfg.model.classes = static_cast<int>(p.parse_int(key, value));
        else if (key == "model.dropout") cfg.model.dropout = p.parse_float(key, value);
        else if (key == "model.loss_alpha") cfg.model.loss_alpha = p.parse_float(key, value);
        else if (key == "model.loss_beta") cfg.model.loss_beta = p.parse_float(key, value);
        else if (key == "model.precision") {
            if (value == "f32") cfg.model.precision = Dtype::f32;
            else if (value == "f64") cfg.model.precision = Dtype::f64;
            else p.fail("expected f32 or f64 for 'model.precision'");
        }
        else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(p.parse_int(key, value));
        else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(p.parse_int(key, value));
        else if (key == "train.lr") cfg.train.lr = p.parse_float(key, value);
        else if (key == "train.lr_decay_factor") cfg.train.lr_decay_factor = p.parse_float(key, value);
        else if (key == "train.lr_decay_every") cfg.train.lr_decay_every = static_cast<int>(p.parse_int(key, value));
        else if (key == "train.beta1") cfg.train.beta1 = p.parse_float(key, value);
        else if (key == "train.beta2") cfg.train.beta2 = p.parse_float(key, value);
        else if (key == "train.adam_eps") cfg.train.adam_eps = p.parse_float(key, value);
        else if (key == "train.weight_decay") cfg.train.weight_decay = p.parse_float(key, value);
        else if (key == "train.augment_flip") cfg.train.augment_flip = p.parse_bool(key, value);
        else if (key == "train.augment_temporal_crop") cfg.train.augment_temporal_crop = p.parse_bool(key, value);
        else if (key == "train.seed") {
            cfg.train.seed = p.parse_u64(key, value);
            train_seed_set = true;
        }
        else if (key == "data.classes") cfg.data.classes = static_cast<int>(p.parse_int(key, value));
        else if (key == "data.clips_per_class") cfg.data.clips_per_class = static_cast<int>(p.parse_int(key, value));
        else if (key == "data.frames") cfg.data.frames = static_cast<int>(p.parse_int(key, value));
        else if (key == "data.size") cfg.data.size = static_cast<int>(p.parse_int(key, value));
        else if (key == "data.train_fraction") cfg.data.train_fraction = p.parse_float(key, value);
        else if (key == "data.frac_hq") cfg.data.frac_hq = p.parse_float(key, value);
        else if (key == "data.frac_lq") cfg.data.frac_lq = p.parse_float(key, value);
        else if (key == "data.strength") cfg.data.strength = p.parse_float(key, value);
        else if (key == "data.seed") {
            cfg.data.seed = p.parse_u64(key, value);
            data_seed_set = true;
        }
        else if (key == "seed") cfg.seed = p.parse_u64(key, value);
        else p.fail("unknown key '" + key + "'");
    }
    if (!train_seed_set) cfg.train.seed = cfg.seed;
    if (!data_seed_set) cfg.data.seed = cfg.seed;
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    return parse_config(read_text_file(path));
}

}  // namespace fame
