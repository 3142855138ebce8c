#include "fame/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "fame/config.hpp"
#include "fame/util.hpp"

namespace fame {

namespace {

constexpr char kMagic[5] = {'F', 'A', 'M', 'E', '\x01'};

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8) throw DataError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

double get_f64(std::istream& in) {
    const std::uint64_t bits = get_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(t.rank()));
    for (auto d : t.shape()) put_u64(out, static_cast<std::uint64_t>(d));
    for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(out, t.value_at(i));
}

std::pair<std::string, Tensor> get_tensor(std::istream& in) {
    const std::uint64_t name_len = get_u64(in);
    if (name_len > 4096) throw DataError("checkpoint: implausible tensor name length");
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (static_cast<std::uint64_t>(in.gcount()) != name_len) throw DataError("checkpoint truncated");
    const std::uint64_t rank = get_u64(in);
    if (rank > 8) throw DataError("checkpoint: implausible tensor rank");
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) {
        shape.push_back(static_cast<std::int64_t>(get_u64(in)));
    }
    Tensor t = Tensor::zeros(shape, Dtype::f64);
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value(i, get_f64(in));
    return {name, t};
}

std::string config_block(const Checkpoint& ckpt) {
    std::ostringstream os;
    os << "model.input_size = " << ckpt.config.input_size << "\n";
    os << "model.channels = " << ckpt.config.channels << "\n";
    os << "model.frames = " << ckpt.config.frames << "\n";
    os << "model.stages = " << stages_to_string(ckpt.config.stages) << "\n";
    os << "model.h_cell = " << ckpt.config.h_cell << "\n";
    os << "model.spatial_hidden = " << ckpt.config.spatial_hidden << "\n";
    os << "model.spatial_attention = " << (ckpt.config.spatial_attention ? "true" : "false") << "\n";
    os << "model.temporal_mode = " << temporal_mode_name(ckpt.config.temporal_mode) << "\n";
    os << "model.classes = " << ckpt.config.classes << "\n";
    os << "model.dropout = " << format_double(ckpt.config.dropout) << "\n";
    os << "model.loss_alpha = " << format_double(ckpt.config.loss_alpha) << "\n";
    os << "model.loss_beta = " << format_double(ckpt.config.loss_beta) << "\n";
    os << "model.precision = " << dtype_name(ckpt.config.precision) << "\n";
    os << "seed = " << ckpt.seed << "\n";
    os << "epoch = " << ckpt.epoch << "\n";
    // hash of the model lines above, recomputed on every save
    os << "config_hash = " << fnv1a64_hex(os.str()) << "\n";
    return os.str();
}

void parse_config_block(const std::string& text, Checkpoint& ckpt) {
    FameConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim_str(line.substr(0, eq));
        const std::string value = trim_str(line.substr(eq + 1));
        if (key == "model.input_size") cfg.input_size = std::stoi(value);
        else if (key == "model.channels") cfg.channels = std::stoi(value);
        else if (key == "model.frames") cfg.frames = std::stoi(value);
        else if (key == "model.stages") cfg.stages = stages_from_string(value);
        else if (key == "model.h_cell") cfg.h_cell = std::stoi(value);
        else if (key == "model.spatial_hidden") cfg.spatial_hidden = std::stoi(value);
        else if (key == "model.spatial_attention") cfg.spatial_attention = value == "true";
        else if (key == "model.temporal_mode") cfg.temporal_mode = temporal_mode_from_name(value);
        else if (key == "model.classes") cfg.classes = std::stoi(value);
        else if (key == "model.dropout") cfg.dropout = std::stod(value);
        else if (key == "model.loss_alpha") cfg.loss_alpha = std::stod(value);
        else if (key == "model.loss_beta") cfg.loss_beta = std::stod(value);
        else if (key == "model.precision") cfg.precision = value == "f32" ? Dtype::f32 : Dtype::f64;
        else if (key == "seed") ckpt.seed = std::strtoull(value.c_str(), nullptr, 10);
        else if (key == "epoch") ckpt.epoch = std::stoll(value);
        else if (key == "config_hash") { /* informational; regenerated on save */ }
        else throw DataError("checkpoint config: unknown key " + key);
    }
    ckpt.config = cfg;
}

}  // namespace

Checkpoint checkpoint_from_model(FameModel& model, std::uint64_t seed, std::int64_t epoch) {
    Checkpoint ckpt;
    ckpt.config = model.config;
    ckpt.seed = seed;
    ckpt.epoch = epoch;
    for (auto& p : model.named_parameters()) {
        ckpt.tensors.emplace_back(p.name, p.tensor.to_dtype(Dtype::f64));
    }
    for (auto& b : model.named_buffers()) {
        ckpt.tensors.emplace_back(b.name, b.tensor.to_dtype(Dtype::f64));
    }
    return ckpt;
}

FameModel model_from_checkpoint(const Checkpoint& ckpt) {
    FameModel model = build_model(ckpt.config, /*seed=*/0);
    auto params = model.named_parameters();
    auto buffers = model.named_buffers();
    std::size_t applied = 0;
    for (const auto& [name, tensor] : ckpt.tensors) {
        Tensor dst;
        for (auto& p : params) {
            if (p.name == name) dst = p.tensor;
        }
        if (!dst.defined()) {
            for (auto& b : buffers) {
                if (b.name == name) dst = b.tensor;
            }
        }
        if (!dst.defined()) throw DataError("checkpoint: unknown tensor " + name);
        if (dst.shape() != tensor.shape()) {
            throw DataError("checkpoint: shape mismatch for " + name + ": file " +
                            shape_str(tensor.shape()) + " vs config " + shape_str(dst.shape()));
        }
        for (std::int64_t i = 0; i < tensor.numel(); ++i) dst.set_value(i, tensor.value_at(i));
        ++applied;
    }
    if (applied != params.size() + buffers.size()) {
        throw DataError("checkpoint: missing tensors for the embedded config");
    }
    return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 5);
    const std::string cfg = config_block(ckpt);
    put_u64(out, cfg.size());
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    put_u64(out, ckpt.tensors.size());
    for (const auto& [name, tensor] : ckpt.tensors) put_tensor(out, name, tensor);
    out.put(ckpt.has_optimizer ? '\x01' : '\x00');
    if (ckpt.has_optimizer) {
        put_u64(out, static_cast<std::uint64_t>(ckpt.opt_step));
        put_u64(out, ckpt.opt_tensors.size());
        for (const auto& [name, tensor] : ckpt.opt_tensors) put_tensor(out, name, tensor);
    }
    if (!out) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[5];
    in.read(magic, 5);
    if (in.gcount() != 5 || std::memcmp(magic, kMagic, 5) != 0) {
        throw DataError("bad checkpoint magic in " + path);
    }
    Checkpoint ckpt;
    const std::uint64_t cfg_len = get_u64(in);
    if (cfg_len > 1 << 20) throw DataError("checkpoint: implausible config length");
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), static_cast<std::streamsize>(cfg_len));
    if (static_cast<std::uint64_t>(in.gcount()) != cfg_len) throw DataError("checkpoint truncated");
    parse_config_block(cfg, ckpt);
    const std::uint64_t count = get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) ckpt.tensors.push_back(get_tensor(in));
    const int flag = in.get();
    if (flag == EOF) throw DataError("checkpoint truncated");
    ckpt.has_optimizer = flag == 1;
    if (ckpt.has_optimizer) {
        ckpt.opt_step = static_cast<std::int64_t>(get_u64(in));
        const std::uint64_t opt_count = get_u64(in);
        for (std::uint64_t i = 0; i < opt_count; ++i) ckpt.opt_tensors.push_back(get_tensor(in));
    }
    return ckpt;
}

}  // namespace fame
