#pragma once

#include "fsma/model/config.hpp"

#include <torch/torch.h>

#include <vector>

namespace fsma::model {

/// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus projection shortcut when the shape changes.
struct BasicBlockImpl : torch::nn::Module {
    BasicBlockImpl(std::int64_t in_channels, std::int64_t out_channels, std::int64_t stride);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, shortcut_conv{nullptr};
    torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr}, shortcut_bn{nullptr};
};
TORCH_MODULE(BasicBlock);

/// Per-scale features, ascending stride (index 0 is stride 2), and the latent code.
struct EncoderOutput {
    std::vector<torch::Tensor> pyramid;
    torch::Tensor z;
};

/// ResNet-style encoder. Stage e (1-based) halves the resolution and emits the
/// stride-2^e feature; the deepest feature is pooled and projected to z.
struct EncoderImpl : torch::nn::Module {
    explicit EncoderImpl(const BackboneConfig& cfg);
    EncoderOutput forward(const torch::Tensor& x);

    BackboneConfig cfg;
    torch::nn::Conv2d stem_conv{nullptr};
    torch::nn::BatchNorm2d stem_bn{nullptr};
    torch::nn::ModuleList stages{nullptr};
    torch::nn::Linear to_latent{nullptr};
};
TORCH_MODULE(Encoder);

/// Inverted encoder. The bundle drives it level by level so that skip layers
/// and interleaved transfer layers can be spliced in before each upsample.
struct DecoderImpl : torch::nn::Module {
    explicit DecoderImpl(const BackboneConfig& cfg);

    /// Latent code -> deepest feature map with the given spatial size.
    torch::Tensor project(const torch::Tensor& z, std::int64_t spatial);
    /// Residual block(s) at decoder level `level` (level 0 = deepest scale).
    torch::Tensor block(std::int64_t level, const torch::Tensor& h);
    /// Nearest-neighbour x2 upsample followed by conv/BN/ReLU into the next width.
    torch::Tensor upsample(std::int64_t level, const torch::Tensor& h);
    /// Reconstruction layer, mapped to [0, 1].
    torch::Tensor output(const torch::Tensor& h);

    /// Channel count entering the upsample at `level`.
    std::int64_t width_before_upsample(std::int64_t level) const;
    /// Channel count after the upsample at `level`.
    std::int64_t width_after_upsample(std::int64_t level) const;

    BackboneConfig cfg;
    torch::nn::Linear from_latent{nullptr};
    torch::nn::ModuleList blocks{nullptr};
    torch::nn::ModuleList ups{nullptr};
    torch::nn::Conv2d output_conv{nullptr};
};
TORCH_MODULE(Decoder);

/// Two 3x3 convolutions, each followed by normalisation and ReLU. Carries an
/// encoder feature across to the decoder at the same scale.
struct SkipLayerImpl : torch::nn::Module {
    SkipLayerImpl(std::int64_t in_channels, std::int64_t out_channels, SkipNorm norm);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(SkipLayer);

/// Maps a raw activation to [0, 1] via (tanh + 1) / 2.
torch::Tensor image_activation(const torch::Tensor& x);

} // namespace fsma::model
