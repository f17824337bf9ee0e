#include "fsma/taskdata/image_io.hpp"

#include "fsma/common/errors.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cctype>

namespace fsma::taskdata {

cv::Mat to_mat(const torch::Tensor& image) {
    if (image.dim() != 3 || image.size(0) != 3) throw ValidationError("to_mat: expected a 3 x H x W image");
    auto hwc = image.detach().to(torch::kFloat32).cpu().permute({1, 2, 0}).flip({2}).contiguous();
    cv::Mat wrapped(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_32FC3, hwc.data_ptr<float>());
    return wrapped.clone();
}

torch::Tensor from_mat(const cv::Mat& mat) {
    cv::Mat f;
    if (mat.type() == CV_8UC3) {
        mat.convertTo(f, CV_32FC3, 1.0 / 255.0);
    } else if (mat.type() == CV_32FC3) {
        f = mat.isContinuous() ? mat : mat.clone();
    } else {
        throw ValidationError("from_mat: unsupported matrix type");
    }
    auto t = torch::from_blob(f.data, {f.rows, f.cols, 3}, torch::kFloat32).clone();
    return t.flip({2}).permute({2, 0, 1}).contiguous();
}

cv::Mat mask_to_mat(const torch::Tensor& mask) {
    if (mask.dim() != 2) throw ValidationError("mask_to_mat: expected an H x W mask");
    auto m = mask.detach().cpu();
    if ((m < 0).any().item<bool>() || (m > 255).any().item<bool>()) throw ValidationError("mask_to_mat: labels outside [0, 255]");
    auto bytes = m.to(torch::kUInt8).contiguous();
    cv::Mat wrapped(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)), CV_8UC1, bytes.data_ptr<std::uint8_t>());
    return wrapped.clone();
}

torch::Tensor mask_from_mat(const cv::Mat& mat) {
    if (mat.type() != CV_8UC1) throw ValidationError("mask_from_mat: expected an 8-bit single-channel image");
    cv::Mat c = mat.isContinuous() ? mat : mat.clone();
    return torch::from_blob(c.data, {c.rows, c.cols}, torch::kUInt8).to(torch::kInt64);
}

torch::Tensor read_image(const std::filesystem::path& path) {
    auto mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw ValidationError("cannot read image '" + path.string() + "'");
    return from_mat(mat);
}

void write_image(const std::filesystem::path& path, const torch::Tensor& image) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    cv::Mat bytes;
    to_mat(image.clamp(0.0, 1.0)).convertTo(bytes, CV_8UC3, 255.0);
    if (!cv::imwrite(path.string(), bytes)) throw RuntimeError("cannot write image '" + path.string() + "'");
}

torch::Tensor read_mask(const std::filesystem::path& path) {
    auto mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw ValidationError("cannot read mask '" + path.string() + "'");
    if (mat.type() != CV_8UC1) throw ValidationError("mask '" + path.string() + "' is not an 8-bit single-channel image");
    return mask_from_mat(mat);
}

void write_mask(const std::filesystem::path& path, const torch::Tensor& mask) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mask_to_mat(mask))) throw RuntimeError("cannot write mask '" + path.string() + "'");
}

torch::Tensor resize_image(const torch::Tensor& image, std::int64_t height, std::int64_t width) {
    if (image.size(1) == height && image.size(2) == width) return image;
    const bool shrink = height < image.size(1) || width < image.size(2);
    cv::Mat out;
    cv::resize(to_mat(image), out, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0,
               shrink ? cv::INTER_AREA : cv::INTER_LINEAR);
    return from_mat(out).clamp(0.0, 1.0);
}

torch::Tensor resize_mask(const torch::Tensor& mask, std::int64_t height, std::int64_t width) {
    if (mask.size(0) == height && mask.size(1) == width) return mask;
    cv::Mat out;
    cv::resize(mask_to_mat(mask), out, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_NEAREST);
    return mask_from_mat(out);
}

bool is_image_file(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".ppm";
}

} // namespace fsma::taskdata
