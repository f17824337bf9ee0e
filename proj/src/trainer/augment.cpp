#include "fsma/trainer/augment.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/taskdata/image_io.hpp"

#include <opencv2/imgproc.hpp>

#include <cmath>
#include <numbers>

namespace fsma::trainer {

using namespace taskdata;

AffineParams draw_affine(const AugmentSpec& spec, std::int64_t height, std::int64_t width, Rng& rng) {
    AffineParams p;
    p.flip = spec.mirror && rng.bernoulli(0.5);
    p.angle_deg = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg);
    p.scale = rng.uniform(spec.scale_min, spec.scale_max);
    p.tx = rng.uniform(-spec.max_translation, spec.max_translation) * static_cast<double>(width);
    p.ty = rng.uniform(-spec.max_translation, spec.max_translation) * static_cast<double>(height);
    return p;
}

cv::Matx23d affine_matrix(const AffineParams& params, std::int64_t height, std::int64_t width) {
    const double cx = (static_cast<double>(width) - 1.0) / 2.0;
    const double cy = (static_cast<double>(height) - 1.0) / 2.0;
    const double t = params.angle_deg * std::numbers::pi / 180.0;
    const double a = params.scale * std::cos(t);
    const double b = params.scale * std::sin(t);
    // Mirror first: x -> 2 cx - x.
    const double fx = params.flip ? -1.0 : 1.0;
    const double ox = params.flip ? 2.0 * cx : 0.0;
    // p' = A (F p - c) + c + t with A = [[a, -b], [b, a]].
    const double m00 = a * fx;
    const double m01 = -b;
    const double m10 = b * fx;
    const double m11 = a;
    const double m02 = a * (ox - cx) - b * (-cy) + cx + params.tx;
    const double m12 = b * (ox - cx) + a * (-cy) + cy + params.ty;
    return {m00, m01, m02, m10, m11, m12};
}

cv::Matx23d rescale_matrix(const cv::Matx23d& m, double factor) {
    return {m(0, 0), m(0, 1), m(0, 2) * factor, m(1, 0), m(1, 1), m(1, 2) * factor};
}

Point2 apply(const cv::Matx23d& m, const Point2& p) {
    return {m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2), m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)};
}

torch::Tensor warp_tensor(const torch::Tensor& t, const cv::Matx23d& m, bool nearest) {
    const cv::Mat mat(m);
    if (t.dim() == 2) {
        auto src = t.to(torch::kInt32).contiguous();
        cv::Mat in(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_32SC1, src.data_ptr<int>());
        cv::Mat f;
        in.convertTo(f, CV_32FC1);
        cv::Mat out;
        cv::warpAffine(f, out, mat, f.size(), cv::INTER_NEAREST, cv::BORDER_REFLECT_101);
        return torch::from_blob(out.data, {out.rows, out.cols}, torch::kFloat32).round().to(t.dtype());
    }
    if (t.dim() != 3) throw ValidationError("warp_tensor: expected C x H x W or H x W");
    const auto flags = nearest ? cv::INTER_NEAREST : cv::INTER_LINEAR;
    auto src = t.to(torch::kFloat32).contiguous();
    std::vector<torch::Tensor> channels;
    for (std::int64_t c = 0; c < t.size(0); ++c) {
        auto ch = src[c].contiguous();
        cv::Mat in(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), CV_32FC1, ch.data_ptr<float>());
        cv::Mat out;
        cv::warpAffine(in, out, mat, in.size(), flags, cv::BORDER_REFLECT_101);
        channels.push_back(torch::from_blob(out.data, {out.rows, out.cols}, torch::kFloat32).clone());
    }
    return torch::stack(channels).to(t.dtype());
}

AnnotatedSample apply_affine(const AnnotatedSample& sample, const AffineParams& params, const AugmentSpec& spec) {
    const auto h = sample.height();
    const auto w = sample.width();
    const auto m = affine_matrix(params, h, w);
    AnnotatedSample out;
    out.id = sample.id;
    out.image = warp_tensor(sample.image, m, false).clamp(0.0, 1.0);
    std::visit(
        [&](const auto& ann) {
            using T = std::decay_t<decltype(ann)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                out.annotation = ann;
            } else if constexpr (std::is_same_v<T, LandmarkAnnotation>) {
                const auto& pts = ann.points;
                if (params.flip && spec.point_swap.size() != pts.size()) {
                    throw ValidationError("augment: mirroring landmarks requires a point_swap table of size " +
                                          std::to_string(pts.size()));
                }
                PointSet moved(pts.size());
                for (std::size_t k = 0; k < pts.size(); ++k) {
                    const auto src = params.flip ? static_cast<std::size_t>(spec.point_swap[k]) : k;
                    moved[k] = apply(m, pts[src]);
                }
                out.annotation = LandmarkAnnotation{std::move(moved)};
            } else if constexpr (std::is_same_v<T, ClassMaskAnnotation>) {
                auto labels = warp_tensor(ann.labels, m, true);
                if (params.flip) {
                    if (static_cast<std::int64_t>(spec.class_swap.size()) != ann.num_classes) {
                        throw ValidationError("augment: mirroring segmentation requires a class_swap table of size " +
                                              std::to_string(ann.num_classes));
                    }
                    const auto table = torch::tensor(spec.class_swap, torch::kInt64);
                    const auto valid = labels < ann.num_classes;
                    labels = torch::where(valid, table.index({labels.clamp(0, ann.num_classes - 1)}), labels);
                }
                out.annotation = ClassMaskAnnotation{labels, ann.num_classes};
            } else if constexpr (std::is_same_v<T, TargetImageAnnotation>) {
                out.annotation = TargetImageAnnotation{warp_tensor(ann.target, m, false).clamp(0.0, 1.0)};
            } else if constexpr (std::is_same_v<T, ShadowAnnotation>) {
                out.annotation = ShadowAnnotation{warp_tensor(ann.clean, m, false).clamp(0.0, 1.0),
                                                  warp_tensor(ann.mask.to(torch::kInt64), m, true) > 0};
            }
        },
        sample.annotation);
    return out;
}

AnnotatedSample augment(const AnnotatedSample& sample, const AugmentSpec& spec, Rng& rng) {
    if (!spec.enabled) return sample;
    return apply_affine(sample, draw_affine(spec, sample.height(), sample.width(), rng), spec);
}

} // namespace fsma::trainer
