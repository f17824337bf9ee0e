#include "fsma/model/checkpoint.hpp"

#include "fsma/common/errors.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <unistd.h>

namespace fsma::model {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'M', 'A', 'C', 'K', 'P', 'T'};

enum class DType : std::uint8_t { f32 = 0, f64 = 1, i64 = 2 };

DType dtype_code(const torch::Tensor& t) {
    switch (t.scalar_type()) {
    case torch::kFloat32: return DType::f32;
    case torch::kFloat64: return DType::f64;
    case torch::kInt64: return DType::i64;
    default: throw RuntimeError("checkpoint: unsupported tensor dtype " + std::string(c10::toString(t.scalar_type())));
    }
}

torch::ScalarType scalar_type(DType code) {
    switch (code) {
    case DType::f32: return torch::kFloat32;
    case DType::f64: return torch::kFloat64;
    case DType::i64: return torch::kInt64;
    }
    throw ValidationError("checkpoint: unknown dtype code");
}

class HashingWriter {
public:
    explicit HashingWriter(std::ofstream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 1099511628211ULL;
        }
    }
    template <typename T>
    void value(T v) {
        bytes(&v, sizeof(T));
    }
    std::uint64_t hash() const { return hash_; }

private:
    std::ofstream& out_;
    std::uint64_t hash_ = 1469598103934665603ULL;
};

class HashingReader {
public:
    HashingReader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (!in_) throw ValidationError("checkpoint '" + path_ + "': truncated archive");
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 1099511628211ULL;
        }
    }
    template <typename T>
    T value() {
        T v{};
        bytes(&v, sizeof(T));
        return v;
    }
    std::uint64_t hash() const { return hash_; }

private:
    std::ifstream& in_;
    std::string path_;
    std::uint64_t hash_ = 1469598103934665603ULL;
};

} // namespace

nlohmann::json to_json(const CheckpointManifest& m) {
    nlohmann::json j;
    j["format_version"] = m.format_version;
    j["stage"] = m.stage;
    j["backbone"] = to_json(m.backbone);
    j["task"] = m.task ? to_json(*m.task) : nlohmann::json(nullptr);
    j["mask"] = m.mask;
    j["skip_norm"] = to_string(m.skip_norm);
    j["step"] = m.step;
    j["seed"] = m.seed;
    j["head_seed"] = m.head_seed;
    j["extra"] = m.extra;
    return j;
}

CheckpointManifest manifest_from_json(const nlohmann::json& j) {
    CheckpointManifest m;
    try {
        m.format_version = j.at("format_version").get<std::uint32_t>();
        m.stage = j.at("stage").get<std::string>();
        const auto& b = j.at("backbone");
        m.backbone.input_size = b.at("input_size").get<std::int64_t>();
        m.backbone.latent_dim = b.at("latent_dim").get<std::int64_t>();
        m.backbone.base_channels = b.at("base_channels").get<std::int64_t>();
        m.backbone.num_scales = b.at("num_scales").get<std::int64_t>();
        m.backbone.blocks_per_stage = b.at("blocks_per_stage").get<std::int64_t>();
        m.backbone.latent_grid = b.at("latent_grid").get<std::int64_t>();
        if (!j.at("task").is_null()) m.task = task_from_json(j.at("task"));
        m.mask = j.at("mask").get<std::string>();
        m.skip_norm = parse_skip_norm(j.at("skip_norm").get<std::string>());
        m.step = j.at("step").get<std::int64_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.head_seed = j.at("head_seed").get<std::uint64_t>();
        m.extra = j.value("extra", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("checkpoint manifest: ") + e.what());
    }
    return m;
}

std::vector<NamedTensor> Checkpoint::with_prefix(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    const auto p = prefix + ".";
    for (const auto& [name, tensor] : tensors) {
        if (name.rfind(p, 0) == 0) out.emplace_back(name.substr(p.size()), tensor);
    }
    return out;
}

bool Checkpoint::has_prefix(const std::string& prefix) const {
    const auto p = prefix + ".";
    return std::any_of(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first.rfind(p, 0) == 0; });
}

Checkpoint make_checkpoint(const ModelBundle& model, const std::string& stage, std::int64_t step) {
    Checkpoint ckpt;
    auto& m = ckpt.manifest;
    m.stage = stage;
    m.backbone = model.config();
    m.task = model.task();
    m.mask = model.mask().to_string();
    m.skip_norm = model.skip_norm();
    m.step = step;
    m.seed = model.seed();
    m.head_seed = model.head_seed();
    for (const auto& [name, tensor] : model.named_state()) {
        ckpt.tensors.emplace_back("net." + name, tensor.detach().clone());
    }
    return ckpt;
}

void append_module_state(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& item : module.named_parameters()) {
        ckpt.tensors.emplace_back(prefix + "." + item.key(), item.value().detach().clone());
    }
    for (const auto& item : module.named_buffers()) {
        ckpt.tensors.emplace_back(prefix + "." + item.key(), item.value().detach().clone());
    }
}

void load_module_state(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module) {
    const auto state = ckpt.with_prefix(prefix);
    std::map<std::string, torch::Tensor> given(state.begin(), state.end());
    torch::NoGradGuard no_grad;
    auto copy_into = [&](const std::string& name, torch::Tensor& target) {
        auto it = given.find(name);
        if (it == given.end()) throw ValidationError("checkpoint: missing tensor '" + prefix + "." + name + "'");
        if (it->second.sizes() != target.sizes()) throw ValidationError("checkpoint: shape mismatch for '" + prefix + "." + name + "'");
        target.copy_(it->second);
    };
    for (auto& item : module.named_parameters()) copy_into(item.key(), item.value());
    for (auto& item : module.named_buffers()) copy_into(item.key(), item.value());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("checkpoint: cannot write '" + path.string() + "'");
        out.write(kMagic, sizeof(kMagic));
        HashingWriter w(out);
        w.value<std::uint32_t>(ckpt.manifest.format_version);
        const auto manifest = to_json(ckpt.manifest).dump(2) + "\n";
        w.value<std::uint64_t>(manifest.size());
        w.bytes(manifest.data(), manifest.size());
        w.value<std::uint64_t>(ckpt.tensors.size());
        for (const auto& [name, tensor] : ckpt.tensors) {
            auto t = tensor.detach().contiguous().cpu();
            w.value<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
            w.bytes(name.data(), name.size());
            w.value<std::uint8_t>(static_cast<std::uint8_t>(dtype_code(t)));
            w.value<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
            for (auto d : t.sizes()) w.value<std::int64_t>(d);
            w.value<std::uint64_t>(static_cast<std::uint64_t>(t.nbytes()));
            w.bytes(t.data_ptr(), static_cast<std::size_t>(t.nbytes()));
        }
        const auto hash = w.hash();
        out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw RuntimeError("checkpoint: write failed for '" + path.string() + "'");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw RuntimeError("checkpoint: cannot move archive into place at '" + path.string() + "': " + ec.message());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("checkpoint '" + path.string() + "' cannot be opened");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
        throw ValidationError("checkpoint '" + path.string() + "': not an fsma checkpoint");
    }
    HashingReader r(in, path.string());
    const auto version = r.value<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw ValidationError("checkpoint '" + path.string() + "': unsupported format version " + std::to_string(version));
    }
    Checkpoint ckpt;
    std::string manifest(r.value<std::uint64_t>(), '\0');
    r.bytes(manifest.data(), manifest.size());
    try {
        ckpt.manifest = manifest_from_json(nlohmann::json::parse(manifest));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint '" + path.string() + "': bad manifest: " + e.what());
    }
    const auto count = r.value<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name(r.value<std::uint32_t>(), '\0');
        r.bytes(name.data(), name.size());
        const auto type = scalar_type(static_cast<DType>(r.value<std::uint8_t>()));
        std::vector<std::int64_t> dims(r.value<std::uint32_t>());
        for (auto& d : dims) d = r.value<std::int64_t>();
        auto t = torch::empty(dims, torch::TensorOptions().dtype(type));
        const auto nbytes = r.value<std::uint64_t>();
        if (nbytes != static_cast<std::uint64_t>(t.nbytes())) {
            throw ValidationError("checkpoint '" + path.string() + "': payload size mismatch for '" + name + "'");
        }
        r.bytes(t.data_ptr(), nbytes);
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    const auto expected = r.hash();
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in || stored != expected) throw ValidationError("checkpoint '" + path.string() + "': checksum mismatch");
    return ckpt;
}

ModelBundle restore_bundle(const Checkpoint& ckpt) {
    const auto& m = ckpt.manifest;
    auto model = build_autoencoder(m.backbone, m.seed);
    if (m.task) {
        const auto levels = static_cast<std::size_t>(m.task->decoder_levels(m.backbone.num_scales));
        model = attach_head(std::move(model), *m.task, SkipMask::parse(m.mask, levels), m.head_seed, m.skip_norm);
    }
    model.load_state(ckpt.with_prefix("net"));
    return model;
}

} // namespace fsma::model
