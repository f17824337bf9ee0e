#pragma once

#include "fsma/taskdata/sample.hpp"

#include <torch/torch.h>

#include <string>
#include <vector>

namespace fsma::taskdata {

/// Programmatic stand-ins for hand-made style targets.
///   posterize: 4-level rounding per channel plus a dark tint on Sobel edges.
///   warm:      per-channel warm remap followed by a smoothstep contrast curve.
enum class StyleId { posterize, warm };

std::string to_string(StyleId id);
/// Accepts "posterize"/"A" and "warm"/"B".
StyleId parse_style_id(const std::string& text);

inline constexpr int kPosterizeLevels = 4;

/// Deterministic; output stays in [0, 1].
torch::Tensor style_filter(const torch::Tensor& image, StyleId id);

/// Pairs every image with its filtered version (annotation = TargetImageAnnotation).
SampleSet make_style_pairs(const SampleSet& images, StyleId id);

} // namespace fsma::taskdata
