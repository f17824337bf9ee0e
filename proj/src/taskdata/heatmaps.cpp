#include "fsma/taskdata/heatmaps.hpp"

#include "fsma/common/errors.hpp"

#include <algorithm>
#include <cmath>

namespace fsma::taskdata {

void HeatmapConfig::validate() const {
    if (!(sigma > 0.0)) throw ValidationError("heatmap: sigma must be positive");
}

Heatmaps render_heatmaps(const PointSet& points, std::int64_t out_h, std::int64_t out_w, const HeatmapConfig& cfg,
                         std::int64_t source_h, std::int64_t source_w) {
    cfg.validate();
    if (out_h <= 0 || out_w <= 0 || source_h <= 0 || source_w <= 0) throw ValidationError("heatmap: sizes must be positive");
    const auto k = static_cast<std::int64_t>(points.size());
    Heatmaps out{torch::zeros({k, out_h, out_w}), std::vector<bool>(points.size(), false)};
    const double sx = static_cast<double>(out_w) / static_cast<double>(source_w);
    const double sy = static_cast<double>(out_h) / static_cast<double>(source_h);
    const double inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    auto acc = out.maps.accessor<float, 3>();
    for (std::int64_t i = 0; i < k; ++i) {
        const double px = points[i].x * sx;
        const double py = points[i].y * sy;
        if (!std::isfinite(px) || !std::isfinite(py) || px < 0.0 || py < 0.0 || px > out_w - 1.0 || py > out_h - 1.0) continue;
        out.visible[i] = true;
        for (std::int64_t y = 0; y < out_h; ++y) {
            const double dy = y - py;
            for (std::int64_t x = 0; x < out_w; ++x) {
                const double dx = x - px;
                acc[i][y][x] = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv));
            }
        }
    }
    return out;
}

namespace {

/// Vertex offset of the parabola through (-1, l), (0, c), (1, r), limited to half a pixel.
double parabola_offset(double l, double c, double r) {
    const double denom = l - 2.0 * c + r;
    if (!(denom < 0.0)) return 0.0;
    const double off = 0.5 * (l - r) / denom;
    return std::clamp(off, -0.5, 0.5);
}

} // namespace

PointSet decode_landmarks(const torch::Tensor& heatmaps, std::int64_t input_h, std::int64_t input_w) {
    if (heatmaps.dim() != 3) throw ValidationError("decode_landmarks: expected K x h x w heatmaps");
    const auto k = heatmaps.size(0);
    const auto h = heatmaps.size(1);
    const auto w = heatmaps.size(2);
    if (h < 3 || w < 3) throw ValidationError("decode_landmarks: heatmaps must be at least 3 x 3");
    auto maps = heatmaps.detach().to(torch::kFloat64).cpu().contiguous();
    if (!torch::isfinite(maps).all().item<bool>()) throw ValidationError("decode_landmarks: non-finite heatmap values");
    const double sx = static_cast<double>(input_w) / static_cast<double>(w);
    const double sy = static_cast<double>(input_h) / static_cast<double>(h);
    auto acc = maps.accessor<double, 3>();

    PointSet out;
    out.reserve(static_cast<std::size_t>(k));
    for (std::int64_t c = 0; c < k; ++c) {
        std::int64_t best_x = 0;
        std::int64_t best_y = 0;
        double best = acc[c][0][0];
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                if (acc[c][y][x] > best) {
                    best = acc[c][y][x];
                    best_x = x;
                    best_y = y;
                }
            }
        }
        double fx = static_cast<double>(best_x);
        double fy = static_cast<double>(best_y);
        if (best_x > 0 && best_x < w - 1) fx += parabola_offset(acc[c][best_y][best_x - 1], best, acc[c][best_y][best_x + 1]);
        if (best_y > 0 && best_y < h - 1) fy += parabola_offset(acc[c][best_y - 1][best_x], best, acc[c][best_y + 1][best_x]);
        out.push_back({fx * sx, fy * sy});
    }
    return out;
}

} // namespace fsma::taskdata
