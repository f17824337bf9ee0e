#pragma once

#include "fsma/common/geometry.hpp"

#include <torch/torch.h>

#include <string>
#include <variant>
#include <vector>

namespace fsma::taskdata {

struct LandmarkAnnotation {
    PointSet points;  // input-resolution pixel coordinates
};

struct ClassMaskAnnotation {
    torch::Tensor labels;  // H x W int64, values < num_classes
    std::int64_t num_classes = 0;
};

struct TargetImageAnnotation {
    torch::Tensor target;  // 3 x H x W
};

/// The sample's image is the shadowed one; clean and mask complete the pair.
struct ShadowAnnotation {
    torch::Tensor clean;  // 3 x H x W
    torch::Tensor mask;   // H x W, bool
};

using Annotation =
    std::variant<std::monostate, LandmarkAnnotation, ClassMaskAnnotation, TargetImageAnnotation, ShadowAnnotation>;

struct AnnotatedSample {
    std::string id;
    torch::Tensor image;  // 3 x H x W in [0, 1]
    Annotation annotation;

    std::int64_t height() const { return image.size(1); }
    std::int64_t width() const { return image.size(2); }
};

using SampleSet = std::vector<AnnotatedSample>;

} // namespace fsma::taskdata
