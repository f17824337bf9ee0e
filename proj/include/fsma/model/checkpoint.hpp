#pragma once

#include "fsma/model/bundle.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fsma::model {

/// Archive layout (all integers little-endian):
///
///   "FSMACKPT"            8-byte magic
///   u32 version
///   u64 manifest bytes, manifest JSON text
///   u64 tensor count
///   per tensor: u32 name bytes, name, u8 dtype, u32 ndim, i64 dims[ndim], u64 payload bytes, payload
///   u64 FNV-1a hash of everything after the magic
///
/// Tensor names are hierarchical; network tensors carry the "net." prefix,
/// auxiliary modules (discriminators) their own prefix.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointManifest {
    std::uint32_t format_version = kCheckpointVersion;
    std::string stage;  // "pretrain" or "adapt"
    BackboneConfig backbone;
    std::optional<TaskSpec> task;
    std::string mask;
    SkipNorm skip_norm = SkipNorm::batch;
    std::int64_t step = 0;
    std::uint64_t seed = 0;
    std::uint64_t head_seed = 0;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const CheckpointManifest& manifest);
CheckpointManifest manifest_from_json(const nlohmann::json& j);

struct Checkpoint {
    CheckpointManifest manifest;
    std::vector<NamedTensor> tensors;

    /// Tensors whose name starts with `prefix + "."`, prefix stripped.
    std::vector<NamedTensor> with_prefix(const std::string& prefix) const;
    bool has_prefix(const std::string& prefix) const;
};

/// Snapshot of a bundle. Tensors are deep copies.
Checkpoint make_checkpoint(const ModelBundle& model, const std::string& stage, std::int64_t step);

/// Adds a module's parameters and buffers under `prefix`.
void append_module_state(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module);
void load_module_state(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module);

/// Writes to a temporary sibling and renames into place, so a failure never
/// leaves a partial archive at `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the bundle described by the manifest and loads its tensors.
ModelBundle restore_bundle(const Checkpoint& ckpt);

} // namespace fsma::model
