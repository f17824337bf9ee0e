#include "fsma/objectives/ssim.hpp"

#include "fsma/common/errors.hpp"

namespace fsma::objectives {

namespace F = torch::nn::functional;

void SsimConfig::validate() const {
    if (window_size < 3 || window_size % 2 == 0) throw ValidationError("ssim: window_size must be odd and >= 3");
    if (window_sigma <= 0.0) throw ValidationError("ssim: window_sigma must be positive");
    if (c1 <= 0.0 || c2 <= 0.0) throw ValidationError("ssim: stabilisers must be positive");
}

torch::Tensor gaussian_window(std::int64_t size, double sigma, torch::Dtype dtype) {
    auto coords = torch::arange(size, torch::TensorOptions().dtype(torch::kFloat64)) - static_cast<double>(size / 2);
    auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
    return (g / g.sum()).to(dtype);
}

torch::Tensor ssim(const torch::Tensor& x, const torch::Tensor& y, const SsimConfig& cfg) {
    cfg.validate();
    if (x.sizes() != y.sizes()) throw ValidationError("ssim: input shapes differ");
    if (x.dim() != 4) throw ValidationError("ssim: expected N x C x H x W tensors");
    if (x.size(2) < cfg.window_size || x.size(3) < cfg.window_size) {
        throw ValidationError("ssim: image " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                              " is smaller than the " + std::to_string(cfg.window_size) + "-pixel window");
    }
    const auto channels = x.size(1);
    auto g = gaussian_window(cfg.window_size, cfg.window_sigma, x.scalar_type()).to(x.device());
    auto window = torch::outer(g, g).expand({channels, 1, cfg.window_size, cfg.window_size}).contiguous();
    auto filter = [&](const torch::Tensor& t) { return F::conv2d(t, window, F::Conv2dFuncOptions().groups(channels)); };

    auto mu_x = filter(x);
    auto mu_y = filter(y);
    auto mu_xx = mu_x * mu_x;
    auto mu_yy = mu_y * mu_y;
    auto mu_xy = mu_x * mu_y;
    auto var_x = filter(x * x) - mu_xx;
    auto var_y = filter(y * y) - mu_yy;
    auto cov = filter(x * y) - mu_xy;

    auto numerator = (2.0 * mu_xy + cfg.c1) * (2.0 * cov + cfg.c2);
    auto denominator = (mu_xx + mu_yy + cfg.c1) * (var_x + var_y + cfg.c2);
    return (numerator / denominator).mean();
}

} // namespace fsma::objectives
