#pragma once

#include "fsma/model/backbone.hpp"
#include "fsma/model/config.hpp"
#include "fsma/model/skip_mask.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fsma::model {

/// Torch module tree. Top-level children define the parameter groups:
/// encoder and decoder form the backbone; itl, skip and head are adaptation layers.
struct NetworkImpl : torch::nn::Module {
    explicit NetworkImpl(const BackboneConfig& cfg);

    Encoder encoder{nullptr};
    Decoder decoder{nullptr};
    torch::nn::ModuleList itl{nullptr};
    torch::nn::ModuleDict skip{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(Network);

/// Which encoder scales the decoder read during a forward pass.
struct ForwardTrace {
    std::vector<std::int64_t> pyramid_strides_read;
};

using NamedTensor = std::pair<std::string, torch::Tensor>;

/// Auto-encoder plus optional task head.
///
/// Move-only: the module tree has a single owner. Before a head is attached the
/// whole network is trainable (pretraining); afterwards the backbone is frozen,
/// kept in inference mode, and only itl/skip/head parameters require gradients.
class ModelBundle {
public:
    ModelBundle(ModelBundle&&) noexcept = default;
    ModelBundle& operator=(ModelBundle&&) noexcept = default;
    ModelBundle(const ModelBundle&) = delete;
    ModelBundle& operator=(const ModelBundle&) = delete;

    const BackboneConfig& config() const { return cfg_; }
    bool adapted() const { return task_.has_value(); }
    const std::optional<TaskSpec>& task() const { return task_; }
    /// Task the forward pass produces; reconstruction when no head is attached.
    TaskSpec effective_task() const;
    const SkipMask& mask() const { return mask_; }
    SkipNorm skip_norm() const { return skip_norm_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t head_seed() const { return head_seed_; }

    EncoderOutput encode(const torch::Tensor& batch) const;
    /// Runs the decoder (and adaptation layers, if attached) from an encoder output.
    torch::Tensor decode(const EncoderOutput& encoded, ForwardTrace* trace = nullptr) const;
    torch::Tensor forward(const torch::Tensor& batch, ForwardTrace* trace = nullptr) const;

    /// Backbone-only reconstruction, ignoring any attached head.
    torch::Tensor reconstruct(const torch::Tensor& batch) const;

    /// Training mode for the trainable part; a frozen backbone always stays in inference mode.
    void set_training(bool on);

    /// Changes the expected I/O resolution (pretraining phases). Topology is unchanged.
    void set_input_size(std::int64_t size);

    std::vector<torch::Tensor> trainable_parameters() const;
    std::vector<NamedTensor> named_parameters() const;
    /// Parameters and buffers (normalisation statistics), keyed by hierarchical name.
    std::vector<NamedTensor> named_state() const;

    /// Copies tensors by name into this bundle. Every name must exist with a matching shape.
    void load_state(const std::vector<NamedTensor>& state);

    Network& network() { return net_; }
    const Network& network() const { return net_; }

    friend ModelBundle build_autoencoder(const BackboneConfig& cfg, std::uint64_t seed);
    friend ModelBundle attach_head(ModelBundle model, const TaskSpec& task, const SkipMask& mask, std::uint64_t seed,
                                   SkipNorm skip_norm);

private:
    ModelBundle(const BackboneConfig& cfg, std::uint64_t seed);

    BackboneConfig cfg_;
    // Forward passes are logically const but torch modules expose non-const forward().
    mutable Network net_{nullptr};
    std::optional<TaskSpec> task_;
    SkipMask mask_;
    SkipNorm skip_norm_ = SkipNorm::batch;
    std::uint64_t seed_ = 0;
    std::uint64_t head_seed_ = 0;
};

/// Fresh auto-encoder; equal (cfg, seed) give bit-identical parameters.
ModelBundle build_autoencoder(const BackboneConfig& cfg, std::uint64_t seed);

/// Adds one interleaved transfer layer per decoder level, a skip layer for every
/// enabled mask digit, and a new output head; freezes the backbone.
/// Throws ValidationError when the mask length does not match the task.
ModelBundle attach_head(ModelBundle model, const TaskSpec& task, const SkipMask& mask, std::uint64_t seed,
                        SkipNorm skip_norm = SkipNorm::batch);

/// Task output for an N x 3 x S x S batch (S = configured input size).
torch::Tensor forward_task(const ModelBundle& model, const torch::Tensor& batch);

struct ParamGroupCount {
    std::string name;
    std::int64_t count = 0;
    bool frozen = false;
};

struct PartitionReport {
    std::int64_t frozen_count = 0;
    std::int64_t trainable_count = 0;
    std::int64_t total = 0;
    std::vector<ParamGroupCount> groups;
    std::size_t skip_groups = 0;

    const ParamGroupCount* group(const std::string& name) const;
};

PartitionReport param_partition_report(const ModelBundle& model);

/// Group of a hierarchical parameter name: "encoder", "decoder", "itl", "head",
/// or "skip.s<stride>" for one skip layer.
std::string parameter_group(const std::string& name);
bool is_backbone_group(const std::string& group);

/// Order-sensitive FNV-1a hash over every tensor's bytes; for determinism checks.
std::uint64_t state_checksum(const std::vector<NamedTensor>& state);

} // namespace fsma::model
