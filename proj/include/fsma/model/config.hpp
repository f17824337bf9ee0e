#pragma once

#include "fsma/common/json_reader.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace fsma::model {

/// Geometry of the auto-encoder backbone.
struct BackboneConfig {
    std::int64_t input_size = 64;     // square input, pixels
    std::int64_t latent_dim = 99;
    std::int64_t base_channels = 16;
    std::int64_t num_scales = 5;      // feature strides 2, 4, ..., 2^num_scales
    std::int64_t blocks_per_stage = 1;
    std::int64_t latent_grid = 2;     // deepest feature is pooled to latent_grid^2 before the latent projection

    /// Desk-scale default.
    static BackboneConfig toy();
    /// ResNet18-width encoder/decoder at 128 px.
    static BackboneConfig resnet18();

    void validate() const;

    /// Channel width of encoder and decoder features at stride 2^exponent.
    std::int64_t width_at(std::int64_t exponent) const;
    std::int64_t deepest_stride() const { return std::int64_t{1} << num_scales; }

    /// Same topology, different I/O resolution (used between pretraining phases).
    BackboneConfig with_input_size(std::int64_t size) const;

    /// True when parameter tensors are interchangeable (input size may differ).
    bool same_architecture(const BackboneConfig& other) const;

    friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

nlohmann::json to_json(const BackboneConfig& cfg);
void merge(JsonReader reader, BackboneConfig& cfg);

enum class TaskKind { landmarks, segmentation, stylization, shadow_removal, reconstruction };

enum class OutputResolution { half, full };

std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

/// True for tasks whose output is an RGB image trained with L1 + adversarial terms.
bool is_image_task(TaskKind kind);

struct TaskSpec {
    TaskKind kind = TaskKind::reconstruction;
    std::int64_t out_channels = 3;
    OutputResolution resolution = OutputResolution::full;

    /// Builds a spec with the resolution implied by the task kind.
    static TaskSpec make(TaskKind kind, std::int64_t out_channels);

    void validate() const;

    /// Number of decoder upsampling steps the head consumes (= skip-mask length).
    std::int64_t decoder_levels(std::int64_t num_scales) const;

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

nlohmann::json to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

/// Feature normalisation used inside skip layers.
enum class SkipNorm { batch, instance };

std::string to_string(SkipNorm norm);
SkipNorm parse_skip_norm(const std::string& text);

} // namespace fsma::model
