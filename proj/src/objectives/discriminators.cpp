#include "fsma/objectives/discriminators.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/rng.hpp"

namespace fsma::objectives {

namespace F = torch::nn::functional;

namespace {

torch::nn::LeakyReLU leaky() { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)); }

torch::Tensor bce_against(const torch::Tensor& logits, double target) {
    return F::binary_cross_entropy_with_logits(logits, torch::full_like(logits, target));
}

} // namespace

ImageDiscriminator::ImageDiscriminator(const ImageDiscriminatorOptions& options) {
    body_ = register_module("body", torch::nn::Sequential());
    std::int64_t in = options.in_channels;
    std::int64_t out = options.base_channels;
    for (std::int64_t i = 0; i < options.downsamplings; ++i) {
        body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1)));
        body_->push_back(leaky());
        in = out;
        out *= 2;
    }
    body_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, 3).padding(1)));
}

torch::Tensor ImageDiscriminator::forward(const torch::Tensor& x) { return body_->forward(x); }

LatentDiscriminator::LatentDiscriminator(std::int64_t latent_dim, std::int64_t hidden) {
    body_ = register_module("body", torch::nn::Sequential(torch::nn::Linear(latent_dim, hidden), leaky(),
                                                          torch::nn::Linear(hidden, hidden), leaky(),
                                                          torch::nn::Linear(hidden, 1)));
}

torch::Tensor LatentDiscriminator::forward(const torch::Tensor& z) { return body_->forward(z); }

FrozenParameters::FrozenParameters(torch::nn::Module& module) {
    for (auto& p : module.parameters()) {
        saved_.emplace_back(p, p.requires_grad());
        p.requires_grad_(false);
    }
}

FrozenParameters::~FrozenParameters() {
    for (auto& [p, flag] : saved_) p.requires_grad_(flag);
}

torch::Tensor discriminator_loss(Discriminator& disc, const torch::Tensor& real, const torch::Tensor& fake) {
    auto real_logits = disc.forward(real.detach());
    auto fake_logits = disc.forward(fake.detach());
    return 0.5 * (bce_against(real_logits, 1.0) + bce_against(fake_logits, 0.0));
}

torch::Tensor generator_loss(Discriminator& disc, const torch::Tensor& fake) {
    FrozenParameters frozen(disc);
    return bce_against(disc.forward(fake), 1.0);
}

AdversarialLosses image_adv_losses(Discriminator& disc, const torch::Tensor& real, const torch::Tensor& fake) {
    if (real.dim() != 4 || real.sizes().slice(1) != fake.sizes().slice(1) || fake.dim() != 4) {
        throw ValidationError("image_adv_losses: real and fake batches must share C x H x W");
    }
    return {discriminator_loss(disc, real, fake), generator_loss(disc, fake)};
}

PriorSampler standard_normal_prior(std::uint64_t seed) {
    struct State {
        std::mutex mutex;
        Rng rng;
        explicit State(std::uint64_t s) : rng(s) {}
    };
    auto state = std::make_shared<State>(seed);
    return [state](at::IntArrayRef shape) {
        auto out = torch::empty(shape, torch::kFloat32);
        auto* data = out.data_ptr<float>();
        std::lock_guard<std::mutex> lock(state->mutex);
        for (std::int64_t i = 0; i < out.numel(); ++i) data[i] = static_cast<float>(state->rng.normal());
        return out;
    };
}

AdversarialLosses latent_prior_loss(Discriminator& disc, const torch::Tensor& z, const PriorSampler& prior) {
    if (z.dim() != 2) throw ValidationError("latent_prior_loss: expected N x latent_dim codes");
    auto real = prior(z.sizes());
    if (real.sizes() != z.sizes()) throw ValidationError("latent_prior_loss: prior sample shape mismatch");
    real = real.to(z.dtype());
    return {discriminator_loss(disc, real, z), generator_loss(disc, z)};
}

} // namespace fsma::objectives
