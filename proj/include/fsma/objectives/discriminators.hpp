#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <memory>

namespace fsma::objectives {

/// Anything that maps a batch to real/fake logits.
class Discriminator : public torch::nn::Module {
public:
    virtual torch::Tensor forward(const torch::Tensor& x) = 0;
};

struct ImageDiscriminatorOptions {
    std::int64_t in_channels = 3;
    std::int64_t base_channels = 16;
    std::int64_t downsamplings = 2;
};

/// Patch discriminator: strided 3x3 conv + LeakyReLU stages, then a 3x3 conv
/// to one logit per patch. Works down to 1x1 inputs.
class ImageDiscriminator : public Discriminator {
public:
    explicit ImageDiscriminator(const ImageDiscriminatorOptions& options = {});
    torch::Tensor forward(const torch::Tensor& x) override;

private:
    torch::nn::Sequential body_{nullptr};
};

/// Three fully connected layers on latent vectors.
class LatentDiscriminator : public Discriminator {
public:
    LatentDiscriminator(std::int64_t latent_dim, std::int64_t hidden = 128);
    torch::Tensor forward(const torch::Tensor& z) override;

private:
    torch::nn::Sequential body_{nullptr};
};

/// Discriminator and generator sides of the non-saturating BCE GAN loss.
struct AdversarialLosses {
    torch::Tensor d_loss;
    torch::Tensor g_loss;
};

/// 0.5 * (BCE(D(real), 1) + BCE(D(fake), 0)); inputs are detached, so
/// gradients reach the discriminator only.
torch::Tensor discriminator_loss(Discriminator& disc, const torch::Tensor& real, const torch::Tensor& fake);

/// BCE(D(fake), 1) evaluated with the discriminator's parameters excluded from
/// autograd, so gradients reach fake's producer only.
torch::Tensor generator_loss(Discriminator& disc, const torch::Tensor& fake);

/// Both sides for image batches. Throws ValidationError on shape mismatch.
AdversarialLosses image_adv_losses(Discriminator& disc, const torch::Tensor& real, const torch::Tensor& fake);

/// Draws a batch of prior samples with the requested shape.
using PriorSampler = std::function<torch::Tensor(at::IntArrayRef shape)>;

/// Standard normal prior drawn from a dedicated seeded Rng; thread-safe.
PriorSampler standard_normal_prior(std::uint64_t seed);

/// Adversarial matching of latent codes to the prior: prior draws are "real", z is "fake".
AdversarialLosses latent_prior_loss(Discriminator& disc, const torch::Tensor& z, const PriorSampler& prior);

/// RAII: disables requires_grad on a module's parameters for its lifetime.
class FrozenParameters {
public:
    explicit FrozenParameters(torch::nn::Module& module);
    ~FrozenParameters();
    FrozenParameters(const FrozenParameters&) = delete;
    FrozenParameters& operator=(const FrozenParameters&) = delete;

private:
    std::vector<std::pair<torch::Tensor, bool>> saved_;
};

} // namespace fsma::objectives
