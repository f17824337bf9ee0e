#include "fsma/model/backbone.hpp"

namespace fsma::model {

namespace F = torch::nn::functional;

namespace {

torch::nn::Conv2d conv3x3(std::int64_t in, std::int64_t out, std::int64_t stride = 1, bool bias = false) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(bias));
}

} // namespace

BasicBlockImpl::BasicBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride) {
    conv1 = register_module("conv1", conv3x3(in_channels, out_channels, stride));
    bn1 = register_module("bn1", torch::nn::BatchNorm2d(out_channels));
    conv2 = register_module("conv2", conv3x3(out_channels, out_channels));
    bn2 = register_module("bn2", torch::nn::BatchNorm2d(out_channels));
    if (stride != 1 || in_channels != out_channels) {
        shortcut_conv = register_module(
            "shortcut_conv",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1).stride(stride).bias(false)));
        shortcut_bn = register_module("shortcut_bn", torch::nn::BatchNorm2d(out_channels));
    }
}

torch::Tensor BasicBlockImpl::forward(const torch::Tensor& x) {
    auto h = torch::relu(bn1(conv1(x)));
    h = bn2(conv2(h));
    auto identity = shortcut_conv ? shortcut_bn(shortcut_conv(x)) : x;
    return torch::relu(h + identity);
}

EncoderImpl::EncoderImpl(const BackboneConfig& config) : cfg(config) {
    cfg.validate();
    const auto c = cfg.base_channels;
    stem_conv = register_module("stem_conv", conv3x3(3, c, 2));
    stem_bn = register_module("stem_bn", torch::nn::BatchNorm2d(c));
    stages = register_module("stages", torch::nn::ModuleList());
    for (std::int64_t e = 1; e <= cfg.num_scales; ++e) {
        torch::nn::Sequential stage;
        // The stem already reached stride 2; later stages downsample in their first block.
        const std::int64_t in = e == 1 ? c : cfg.width_at(e - 1);
        const std::int64_t out = cfg.width_at(e);
        for (std::int64_t b = 0; b < cfg.blocks_per_stage; ++b) {
            const std::int64_t stride = (e > 1 && b == 0) ? 2 : 1;
            stage->push_back(BasicBlock(b == 0 ? in : out, out, stride));
        }
        stages->push_back(stage);
    }
    const auto deep = cfg.width_at(cfg.num_scales);
    to_latent = register_module("to_latent", torch::nn::Linear(deep * cfg.latent_grid * cfg.latent_grid, cfg.latent_dim));
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& x) {
    EncoderOutput out;
    auto h = torch::relu(stem_bn(stem_conv(x)));
    for (const auto& stage : *stages) {
        h = stage->as<torch::nn::Sequential>()->forward(h);
        out.pyramid.push_back(h);
    }
    auto pooled = F::adaptive_avg_pool2d(h, F::AdaptiveAvgPool2dFuncOptions({cfg.latent_grid, cfg.latent_grid}));
    out.z = to_latent(pooled.flatten(1));
    return out;
}

DecoderImpl::DecoderImpl(const BackboneConfig& config) : cfg(config) {
    cfg.validate();
    const auto deep = cfg.width_at(cfg.num_scales);
    from_latent = register_module("from_latent", torch::nn::Linear(cfg.latent_dim, deep * cfg.latent_grid * cfg.latent_grid));
    blocks = register_module("blocks", torch::nn::ModuleList());
    ups = register_module("ups", torch::nn::ModuleList());
    for (std::int64_t level = 0; level < cfg.num_scales; ++level) {
        const auto w = width_before_upsample(level);
        torch::nn::Sequential block;
        for (std::int64_t b = 0; b < cfg.blocks_per_stage; ++b) block->push_back(BasicBlock(w, w, 1));
        blocks->push_back(block);
        ups->push_back(torch::nn::Sequential(conv3x3(w, width_after_upsample(level)),
                                             torch::nn::BatchNorm2d(width_after_upsample(level)),
                                             torch::nn::ReLU()));
    }
    output_conv = register_module("output_conv", conv3x3(cfg.width_at(0), 3, 1, true));
}

std::int64_t DecoderImpl::width_before_upsample(std::int64_t level) const { return cfg.width_at(cfg.num_scales - level); }

std::int64_t DecoderImpl::width_after_upsample(std::int64_t level) const {
    return cfg.width_at(cfg.num_scales - level - 1);
}

torch::Tensor DecoderImpl::project(const torch::Tensor& z, std::int64_t spatial) {
    const auto g = cfg.latent_grid;
    auto h = torch::relu(from_latent(z)).view({z.size(0), cfg.width_at(cfg.num_scales), g, g});
    if (spatial != g) {
        h = F::interpolate(h, F::InterpolateFuncOptions().size(std::vector<std::int64_t>{spatial, spatial}).mode(torch::kNearest));
    }
    return h;
}

torch::Tensor DecoderImpl::block(std::int64_t level, const torch::Tensor& h) {
    return blocks[level]->as<torch::nn::Sequential>()->forward(h);
}

torch::Tensor DecoderImpl::upsample(std::int64_t level, const torch::Tensor& h) {
    auto up = F::interpolate(h, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
    return ups[level]->as<torch::nn::Sequential>()->forward(up);
}

torch::Tensor DecoderImpl::output(const torch::Tensor& h) { return image_activation(output_conv(h)); }

SkipLayerImpl::SkipLayerImpl(std::int64_t in_channels, std::int64_t out_channels, SkipNorm norm) {
    auto make_norm = [&]() -> torch::nn::AnyModule {
        if (norm == SkipNorm::instance) {
            return torch::nn::AnyModule(torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out_channels).affine(true)));
        }
        return torch::nn::AnyModule(torch::nn::BatchNorm2d(out_channels));
    };
    body = register_module("body", torch::nn::Sequential());
    body->push_back("conv1", conv3x3(in_channels, out_channels));
    body->push_back("norm1", make_norm());
    body->push_back("relu1", torch::nn::ReLU());
    body->push_back("conv2", conv3x3(out_channels, out_channels));
    body->push_back("norm2", make_norm());
    body->push_back("relu2", torch::nn::ReLU());
}

torch::Tensor SkipLayerImpl::forward(const torch::Tensor& x) { return body->forward(x); }

torch::Tensor image_activation(const torch::Tensor& x) { return (torch::tanh(x) + 1.0) * 0.5; }

} // namespace fsma::model
