#pragma once

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include <filesystem>

namespace fsma::taskdata {

/// Images are 3 x H x W float32 tensors in [0, 1], RGB channel order.
/// Class masks are H x W int64 tensors.

cv::Mat to_mat(const torch::Tensor& image);        // -> CV_32FC3, BGR
torch::Tensor from_mat(const cv::Mat& mat);        // CV_8UC3 / CV_32FC3 BGR -> tensor

cv::Mat mask_to_mat(const torch::Tensor& mask);    // -> CV_8UC1
torch::Tensor mask_from_mat(const cv::Mat& mat);   // CV_8UC1 -> int64

torch::Tensor read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const torch::Tensor& image);

/// 8-bit single-channel indexed image.
torch::Tensor read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const torch::Tensor& mask);

/// Bilinear (area when shrinking) resize of a 3 x H x W image.
torch::Tensor resize_image(const torch::Tensor& image, std::int64_t height, std::int64_t width);
/// Nearest-neighbour resize of a class mask.
torch::Tensor resize_mask(const torch::Tensor& mask, std::int64_t height, std::int64_t width);

bool is_image_file(const std::filesystem::path& path);

} // namespace fsma::taskdata
