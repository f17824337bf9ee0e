#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace fsma::objectives {

/// Windowed SSIM parameters. Defaults are the conventional 11x11 Gaussian
/// window with sigma 1.5 and stabilisers (0.01 L)^2, (0.03 L)^2 for L = 1.
struct SsimConfig {
    std::int64_t window_size = 11;
    double window_sigma = 1.5;
    double c1 = 1e-4;
    double c2 = 9e-4;

    void validate() const;
};

/// Normalised 1-D Gaussian taps.
torch::Tensor gaussian_window(std::int64_t size, double sigma, torch::Dtype dtype = torch::kFloat32);

/// Mean SSIM over all valid window positions, channels and images.
/// Inputs are N x C x H x W in [0, 1]; the result is a differentiable scalar.
/// Throws ValidationError on shape mismatch or images smaller than the window.
torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y, const SsimConfig& cfg = {});

} // namespace fsma::objectives
