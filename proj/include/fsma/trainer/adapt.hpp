#pragma once

#include "fsma/model/checkpoint.hpp"
#include "fsma/taskdata/sample.hpp"
#include "fsma/trainer/config.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fsma::trainer {

struct AdaptOutputs {
    std::filesystem::path checkpoint;          // adapted model; empty: not written
    std::filesystem::path initial_checkpoint;  // freshly attached head before any step; empty: not written
    std::filesystem::path log;
};

struct AdaptStep {
    std::int64_t step = 0;
    double total = 0.0;
    std::vector<std::pair<std::string, double>> components;
    double d_loss = 0.0;  // image tasks only
};

struct AdaptResult {
    model::ModelBundle model;
    std::vector<AdaptStep> history;
    model::Checkpoint initial;     // state right after attach_head
    model::Checkpoint checkpoint;  // final state; image tasks also carry "disc_img."
};

/// Supervised training of the interleaved transfer layers, skip layers and head
/// on top of a frozen pretrained backbone. Image tasks train a fresh image
/// discriminator alongside (discriminator step, then model step).
///
/// Throws ValidationError when the checkpoint already carries a head, the mask
/// length does not fit the task, or samples do not match the task or the
/// backbone's input size.
AdaptResult run_adapt(const AdaptConfig& cfg, const model::Checkpoint& pretrained, const taskdata::SampleSet& fewshot,
                      const AdaptOutputs& outputs = {});

/// Training targets for a batch: K x h x w heatmaps at the head resolution,
/// H x W labels, or 3 x H x W target images, stacked along a new batch axis.
torch::Tensor build_targets(const model::TaskSpec& task, const taskdata::SampleSet& batch,
                            const taskdata::HeatmapConfig& heatmap, std::int64_t input_size);

/// Throws ValidationError when a sample's annotation does not fit the task.
void check_samples(const model::TaskSpec& task, const taskdata::SampleSet& samples, std::int64_t input_size);

} // namespace fsma::trainer
