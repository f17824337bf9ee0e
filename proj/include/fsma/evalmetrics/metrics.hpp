#pragma once

#include "fsma/common/geometry.hpp"

#include <json.hpp>
#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fsma::evalmetrics {

/// Landmark subsets and the inter-ocular normaliser.
struct NmeSpec {
    std::int64_t num_points = 68;
    std::int64_t left_eye = 36;   // outer corner
    std::int64_t right_eye = 45;  // outer corner
    std::vector<std::int64_t> inside;
    std::vector<std::int64_t> outline;

    /// 68-point layout: outline = jaw contour 0-16, inside = 17-67.
    static NmeSpec ibug68();

    /// Throws ValidationError unless inside/outline partition [0, num_points)
    /// and the eye indices are distinct and in range.
    void validate() const;
};

/// Percentages of the inter-ocular distance. A subset with no points is NaN.
struct NmeResult {
    double inside = 0.0;
    double outline = 0.0;
    double all = 0.0;
};

/// Throws ValidationError on size mismatch or coincident ground-truth eye corners.
NmeResult nme(const PointSet& pred, const PointSet& gt, const NmeSpec& spec);

/// Per-image results averaged field by field.
NmeResult mean_nme(const std::vector<NmeResult>& results);

/// A reported class: the union of one or more raw labels.
struct F1Group {
    std::string name;
    std::vector<std::int64_t> labels;
};

struct F1Spec {
    std::int64_t num_classes = 0;
    std::vector<F1Group> groups;             // reported classes
    std::vector<std::string> component_set;  // groups averaged into "overall"

    /// 11-class face parsing: background, face (skin), eyebrows, eyes, nose,
    /// mouth (upper lip + inner mouth + lower lip), hair. Overall averages
    /// eyebrows, eyes, nose and mouth.
    static F1Spec helen11();

    /// One group per class; `components` names the classes in the overall mean.
    static F1Spec per_class(const std::vector<std::string>& class_names, const std::vector<std::string>& components);

    void validate() const;
};

/// Pixel counts per group, summable across images.
struct F1Counts {
    std::vector<std::int64_t> tp;
    std::vector<std::int64_t> fp;
    std::vector<std::int64_t> fn;

    F1Counts& operator+=(const F1Counts& other);
};

/// Per group F1 = 2TP / (2TP + FP + FN) in percent; nullopt when the group is
/// absent from both prediction and ground truth. Overall is the unweighted
/// mean of the defined component groups (NaN when none is defined).
struct F1Report {
    std::vector<std::string> names;
    std::vector<std::optional<double>> f1;
    double overall = 0.0;

    std::optional<double> get(const std::string& name) const;
};

/// Masks are H x W integer tensors with values in [0, num_classes).
F1Counts f1_counts(const torch::Tensor& pred, const torch::Tensor& gt, const F1Spec& spec);
F1Report f1_from_counts(const F1Counts& counts, const F1Spec& spec);
F1Report seg_f1(const torch::Tensor& pred, const torch::Tensor& gt, const F1Spec& spec);

nlohmann::json to_json(const NmeResult& r);
nlohmann::json to_json(const F1Report& r);
nlohmann::json to_json(const NmeSpec& s);
nlohmann::json to_json(const F1Spec& s);
NmeSpec nme_spec_from_json(const nlohmann::json& j);
F1Spec f1_spec_from_json(const nlohmann::json& j);

} // namespace fsma::evalmetrics
