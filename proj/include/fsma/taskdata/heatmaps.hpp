#pragma once

#include "fsma/common/geometry.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace fsma::taskdata {

struct HeatmapConfig {
    double sigma = 2.0;  // pixels at heatmap resolution; peaks are normalised to 1

    void validate() const;
};

struct Heatmaps {
    torch::Tensor maps;          // K x h x w
    std::vector<bool> visible;   // false where the point fell outside the map
};

/// One isotropic Gaussian per point. Points are given at `source` resolution
/// (height, width) and scaled by out/source before rendering; pass source = out
/// for points already in heatmap coordinates. Out-of-bounds points give an
/// all-zero channel and visible = false.
Heatmaps render_heatmaps(const PointSet& points, std::int64_t out_h, std::int64_t out_w, const HeatmapConfig& cfg,
                         std::int64_t source_h, std::int64_t source_w);

inline Heatmaps render_heatmaps(const PointSet& points, std::int64_t out_h, std::int64_t out_w,
                                const HeatmapConfig& cfg = {}) {
    return render_heatmaps(points, out_h, out_w, cfg, out_h, out_w);
}

/// Per-channel argmax (ties go to the lowest row-major index), refined by a
/// 3-point parabola along each axis, then scaled to the input resolution.
/// Throws ValidationError on non-finite values or maps smaller than 3 x 3.
PointSet decode_landmarks(const torch::Tensor& heatmaps, std::int64_t input_h, std::int64_t input_w);

} // namespace fsma::taskdata
