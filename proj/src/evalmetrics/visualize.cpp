#include "fsma/evalmetrics/visualize.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/taskdata/image_io.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>

namespace fsma::evalmetrics {

namespace {

constexpr std::array<std::array<float, 3>, 12> kPalette{{
    {0.00f, 0.00f, 0.00f}, {0.90f, 0.75f, 0.60f}, {0.45f, 0.25f, 0.10f}, {0.60f, 0.35f, 0.15f},
    {0.10f, 0.45f, 0.90f}, {0.10f, 0.75f, 0.90f}, {0.95f, 0.85f, 0.20f}, {0.85f, 0.15f, 0.20f},
    {0.35f, 0.05f, 0.10f}, {0.95f, 0.40f, 0.50f}, {0.30f, 0.20f, 0.15f}, {0.40f, 0.80f, 0.30f},
}};

std::array<float, 3> color_for(std::int64_t label) {
    if (label < static_cast<std::int64_t>(kPalette.size())) return kPalette[static_cast<std::size_t>(label)];
    const float h = static_cast<float>(std::fmod(label * 0.618033988749895, 1.0));
    return {0.5f + 0.5f * std::cos(6.2832f * h), 0.5f + 0.5f * std::cos(6.2832f * (h + 0.333f)),
            0.5f + 0.5f * std::cos(6.2832f * (h + 0.667f))};
}

} // namespace

torch::Tensor colorize_labels(const torch::Tensor& labels, std::int64_t num_classes) {
    if (labels.dim() != 2) throw ValidationError("colorize_labels: expected H x W labels");
    auto table = torch::empty({std::max<std::int64_t>(num_classes, 1), 3});
    for (std::int64_t c = 0; c < table.size(0); ++c) {
        const auto rgb = color_for(c);
        for (int k = 0; k < 3; ++k) table[c][k] = rgb[static_cast<std::size_t>(k)];
    }
    const auto idx = labels.to(torch::kLong).clamp(0, table.size(0) - 1);
    return table.index_select(0, idx.flatten()).view({labels.size(0), labels.size(1), 3}).permute({2, 0, 1}).contiguous();
}

torch::Tensor overlay_labels(const torch::Tensor& image, const torch::Tensor& labels, std::int64_t num_classes,
                             double alpha) {
    auto lab = labels;
    if (lab.size(0) != image.size(1) || lab.size(1) != image.size(2)) {
        lab = taskdata::resize_mask(lab, image.size(1), image.size(2));
    }
    const auto colors = colorize_labels(lab, num_classes);
    const auto fg = (lab > 0).unsqueeze(0);
    return torch::where(fg, image * (1.0 - alpha) + colors * alpha, image);
}

torch::Tensor draw_points(const torch::Tensor& image, const PointSet& points) {
    cv::Mat mat = taskdata::to_mat(image).clone();
    const int radius = std::max(1, mat.cols / 96);
    for (const auto& p : points) {
        cv::circle(mat, cv::Point(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))), radius,
                   cv::Scalar(0.2, 1.0, 0.2), cv::FILLED, cv::LINE_8);
    }
    return taskdata::from_mat(mat);
}

torch::Tensor tile_grid(const std::vector<std::vector<torch::Tensor>>& rows) {
    std::int64_t tile = 0;
    std::size_t cols = 0;
    for (const auto& row : rows) {
        cols = std::max(cols, row.size());
        for (const auto& t : row) {
            if (!t.defined()) continue;
            if (t.dim() != 3 || t.size(1) != t.size(2)) throw ValidationError("tile_grid: tiles must be 3 x S x S");
            if (tile == 0) tile = t.size(1);
            if (t.size(1) != tile) throw ValidationError("tile_grid: tiles must share one size");
        }
    }
    if (rows.empty() || cols == 0 || tile == 0) throw ValidationError("tile_grid: nothing to tile");
    auto grid = torch::zeros({3, tile * static_cast<std::int64_t>(rows.size()), tile * static_cast<std::int64_t>(cols)});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            if (!rows[r][c].defined()) continue;
            const auto y = static_cast<std::int64_t>(r) * tile;
            const auto x = static_cast<std::int64_t>(c) * tile;
            grid.slice(1, y, y + tile).slice(2, x, x + tile).copy_(rows[r][c].to(torch::kFloat32));
        }
    }
    return grid;
}

} // namespace fsma::evalmetrics
