#pragma once

#include "fsma/common/geometry.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fsma::evalmetrics {

/// Fixed palette, 3 x H x W float in [0, 1]; label 0 is black.
torch::Tensor colorize_labels(const torch::Tensor& labels, std::int64_t num_classes);

/// Alpha blend of the colorized labels over the image; background is left untouched.
torch::Tensor overlay_labels(const torch::Tensor& image, const torch::Tensor& labels, std::int64_t num_classes,
                             double alpha = 0.5);

/// Draws each point as a small filled dot.
torch::Tensor draw_points(const torch::Tensor& image, const PointSet& points);

/// Tiles equally sized 3 x S x S images into a rows x cols grid; missing tiles stay black.
torch::Tensor tile_grid(const std::vector<std::vector<torch::Tensor>>& rows);

} // namespace fsma::evalmetrics
