#include "fsma/taskdata/style.hpp"

#include "fsma/common/errors.hpp"

#include <opencv2/imgproc.hpp>

#include <cstring>

namespace fsma::taskdata {

namespace {

torch::Tensor sobel_magnitude(const torch::Tensor& image) {
    const auto gray = (0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2]).to(torch::kFloat32).contiguous();
    cv::Mat g(static_cast<int>(gray.size(0)), static_cast<int>(gray.size(1)), CV_32FC1);
    std::memcpy(g.data, gray.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(gray.numel()));
    cv::Mat gx;
    cv::Mat gy;
    cv::Sobel(g, gx, CV_32F, 1, 0, 3, 1.0, 0.0, cv::BORDER_REPLICATE);
    cv::Sobel(g, gy, CV_32F, 0, 1, 3, 1.0, 0.0, cv::BORDER_REPLICATE);
    cv::Mat mag;
    cv::magnitude(gx, gy, mag);
    return torch::from_blob(mag.data, {mag.rows, mag.cols}, torch::kFloat32).clone().to(image.dtype());
}

torch::Tensor posterize(const torch::Tensor& image) {
    constexpr double steps = kPosterizeLevels - 1;
    const auto levels = torch::round(image.clamp(0.0, 1.0) * steps) / steps;
    // Edge weight ramps from 0 at |grad| = 0.25 to 1 at 0.75 (Sobel units).
    const auto edge = ((sobel_magnitude(image) - 0.25) / 0.5).clamp(0.0, 1.0).unsqueeze(0);
    const auto ink = torch::tensor({0.12, 0.06, 0.22}, image.options()).view({3, 1, 1});
    return (levels * (1.0 - edge) + ink * edge).clamp(0.0, 1.0);
}

torch::Tensor warm(const torch::Tensor& image) {
    const auto gain = torch::tensor({1.08, 0.98, 0.78}, image.options()).view({3, 1, 1});
    const auto lift = torch::tensor({0.06, 0.03, 0.0}, image.options()).view({3, 1, 1});
    const auto x = (image * gain + lift).clamp(0.0, 1.0);
    return (x * x * (3.0 - 2.0 * x)).clamp(0.0, 1.0);
}

} // namespace

std::string to_string(StyleId id) { return id == StyleId::posterize ? "posterize" : "warm"; }

StyleId parse_style_id(const std::string& text) {
    if (text == "posterize" || text == "A") return StyleId::posterize;
    if (text == "warm" || text == "B") return StyleId::warm;
    throw ValidationError("unknown style '" + text + "' (expected posterize/A or warm/B)");
}

torch::Tensor style_filter(const torch::Tensor& image, StyleId id) {
    if (image.dim() != 3 || image.size(0) != 3) throw ValidationError("style_filter: image must be 3 x H x W");
    torch::NoGradGuard no_grad;
    return id == StyleId::posterize ? posterize(image) : warm(image);
}

SampleSet make_style_pairs(const SampleSet& images, StyleId id) {
    SampleSet out;
    out.reserve(images.size());
    for (const auto& s : images) out.push_back({s.id, s.image, TargetImageAnnotation{style_filter(s.image, id)}});
    return out;
}

} // namespace fsma::taskdata
