#pragma once

#include "fsma/common/json_reader.hpp"
#include "fsma/model/config.hpp"
#include "fsma/objectives/discriminators.hpp"
#include "fsma/objectives/losses.hpp"
#include "fsma/objectives/ssim.hpp"
#include "fsma/taskdata/heatmaps.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fsma::trainer {

/// Adam settings; the discriminators reuse the generator's values.
enum class LrSchedule { constant, cosine };

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& text);

struct OptimizerConfig {
    double lr = 2e-5;
    double beta1 = 0.0;
    double beta2 = 0.999;
    bool amsgrad = false;
    LrSchedule schedule = LrSchedule::constant;  // cosine: lr * (1 + cos(pi t / T)) / 2 over T planned steps

    void validate() const;
};

/// Learning rate for step `t` of `total` planned steps.
double scheduled_lr(const OptimizerConfig& cfg, std::int64_t t, std::int64_t total);

/// Geometric augmentation. Mirroring needs index tables for tasks whose
/// annotations have a left/right identity (landmarks, segmentation).
struct AugmentSpec {
    bool enabled = false;
    bool mirror = true;
    std::vector<std::int64_t> point_swap;  // mirrored index of each landmark
    std::vector<std::int64_t> class_swap;  // mirrored label of each class
    double max_rotation_deg = 10.0;
    double max_translation = 0.05;  // fraction of the image side
    double scale_min = 0.95;
    double scale_max = 1.05;

    void validate() const;
};

struct PretrainPhase {
    std::int64_t resolution = 64;
    std::int64_t epochs = 1;
    std::int64_t batch_size = 8;
    std::int64_t max_steps = 0;  // 0: bounded by epochs only
};

struct PretrainConfig {
    model::BackboneConfig backbone;
    std::vector<PretrainPhase> phases;
    OptimizerConfig optimizer;
    objectives::LossWeights weights;
    objectives::SsimConfig ssim;
    objectives::ImageDiscriminatorOptions image_disc;
    std::int64_t latent_hidden = 128;
    AugmentSpec augment;
    std::uint64_t seed = 0;
    bool deterministic = true;

    /// One 64 px phase, batch 8, 2000 steps, on the small backbone.
    static PretrainConfig toy();
    /// 50 epochs at 128 px (batch 100) then 50 at 256 px (batch 50), lr 2e-5, ResNet18 widths.
    static PretrainConfig full_scale();

    void validate() const;
};

nlohmann::json to_json(const PretrainConfig& cfg);
void merge(JsonReader reader, PretrainConfig& cfg);

struct AdaptConfig {
    model::TaskSpec task = model::TaskSpec::make(model::TaskKind::segmentation, 11);
    std::string mask = "00000";
    model::SkipNorm skip_norm = model::SkipNorm::batch;
    std::int64_t epochs = 0;      // 0: bounded by max_steps only
    std::int64_t max_steps = 1000;
    std::int64_t batch_size = 8;
    OptimizerConfig optimizer;
    AugmentSpec augment;
    objectives::LossWeights weights;  // lambda1 / lambda2 weight L1 and adversarial terms of image tasks
    taskdata::HeatmapConfig heatmap;
    objectives::ImageDiscriminatorOptions image_disc;
    std::int64_t ignore_index = objectives::kDefaultIgnoreIndex;
    std::uint64_t seed = 0;
    bool deterministic = true;

    /// Task-family defaults: lr 1e-2 with beta1 0.9 for landmarks and
    /// segmentation, lr 1e-4 with beta1 0.5 for stylization and shadow removal.
    static AdaptConfig defaults_for(const model::TaskSpec& task);

    /// Small-scale schedule for synthetic data: a fixed step budget, cosine
    /// decay, no augmentation, lr 1e-3 for landmarks and segmentation.
    static AdaptConfig toy(const model::TaskSpec& task);

    /// Epoch budgets, batch sizes and optimizer options of the published
    /// adaptation recipes, looked up by the number of training samples.
    /// Mirroring is enabled only where face index tables exist (68 points, 11 classes).
    static AdaptConfig full_scale(const model::TaskSpec& task, std::size_t train_size);

    void validate() const;
};

nlohmann::json to_json(const AdaptConfig& cfg);
/// Keys absent from the document keep their current values; a "task" key
/// re-applies the task-family defaults before the remaining keys are read.
void merge(JsonReader reader, AdaptConfig& cfg);

nlohmann::json to_json(const OptimizerConfig& cfg);
void merge(JsonReader reader, OptimizerConfig& cfg);
nlohmann::json to_json(const AugmentSpec& spec);
void merge(JsonReader reader, AugmentSpec& spec);

} // namespace fsma::trainer
