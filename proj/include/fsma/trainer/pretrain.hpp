#pragma once

#include "fsma/model/checkpoint.hpp"
#include "fsma/objectives/losses.hpp"
#include "fsma/taskdata/sample.hpp"
#include "fsma/trainer/config.hpp"

#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

namespace fsma::trainer {

struct PretrainOutputs {
    std::filesystem::path checkpoint;  // empty: not written
    std::filesystem::path log;         // empty: not written
};

struct PretrainStep {
    std::int64_t step = 0;
    std::int64_t phase = 0;
    objectives::LossReport report;
    double d_image = 0.0;
    double d_latent = 0.0;
};

struct PretrainResult {
    model::ModelBundle model;
    std::vector<PretrainStep> history;
    model::Checkpoint checkpoint;  // network under "net.", discriminators under "disc_img." / "disc_lat."
};

/// Adversarial auto-encoder training. Each batch runs one discriminator step
/// (image and latent discriminators) followed by one generator step on
/// lambda1 L1 + lambda2 L_adv + lambda3 L_enc + lambda4 (1 - SSIM).
/// Phases run in order; the model's I/O resolution follows each phase.
/// Only the images of `dataset` are used.
PretrainResult run_pretrain(const PretrainConfig& cfg, const taskdata::SampleSet& dataset,
                            const PretrainOutputs& outputs = {});

/// Applies `lr` to every parameter group.
void set_learning_rate(torch::optim::Adam& opt, double lr);

/// [begin, end) index ranges covering n samples in batches of batch_size. A
/// trailing batch of one sample joins the previous batch, since batch
/// normalisation at the 1 x 1 bottleneck needs two samples.
std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::int64_t batch_size);

/// Steps a loop over `n` samples will run: epochs x batches, capped by
/// max_steps; a non-positive bound is ignored.
std::int64_t planned_steps(std::size_t n, std::int64_t batch_size, std::int64_t epochs, std::int64_t max_steps);

/// Sets single-threaded intra-op execution when `deterministic` is true.
void configure_threads(bool deterministic);

/// N x 3 x H x W batch of the samples' images.
torch::Tensor stack_images(const taskdata::SampleSet& samples);

} // namespace fsma::trainer
