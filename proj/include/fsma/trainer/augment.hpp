#pragma once

#include "fsma/common/rng.hpp"
#include "fsma/taskdata/sample.hpp"
#include "fsma/trainer/config.hpp"

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace fsma::trainer {

/// One draw of the geometric augmentation. Translation is in pixels.
struct AffineParams {
    bool flip = false;
    double angle_deg = 0.0;
    double scale = 1.0;
    double tx = 0.0;
    double ty = 0.0;
};

AffineParams draw_affine(const AugmentSpec& spec, std::int64_t height, std::int64_t width, Rng& rng);

/// Source-to-destination map in pixel-index coordinates: optional mirror
/// x -> (W - 1 - x), then rotation and scaling about the image centre, then translation.
cv::Matx23d affine_matrix(const AffineParams& params, std::int64_t height, std::int64_t width);

/// Same map expressed on a grid `factor` times the size (e.g. 0.5 for half-resolution heatmaps).
cv::Matx23d rescale_matrix(const cv::Matx23d& m, double factor);

/// Warps every channel of a C x H x W float tensor (bilinear) or an H x W
/// integer mask (nearest). Borders reflect.
torch::Tensor warp_tensor(const torch::Tensor& t, const cv::Matx23d& m, bool nearest);

Point2 apply(const cv::Matx23d& m, const Point2& p);

/// Applies one geometric map to the image and its annotation. Mirrored
/// landmarks take the position of their swap partner; mirrored labels are
/// remapped through the class table. Throws ValidationError when a flip needs
/// a swap table that the spec does not provide.
taskdata::AnnotatedSample apply_affine(const taskdata::AnnotatedSample& sample, const AffineParams& params,
                                       const AugmentSpec& spec);

/// Identity when the spec is disabled; otherwise draws parameters and applies them.
taskdata::AnnotatedSample augment(const taskdata::AnnotatedSample& sample, const AugmentSpec& spec, Rng& rng);

} // namespace fsma::trainer
