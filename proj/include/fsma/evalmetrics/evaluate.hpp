#pragma once

#include "fsma/common/json_reader.hpp"
#include "fsma/evalmetrics/metrics.hpp"
#include "fsma/model/bundle.hpp"
#include "fsma/taskdata/sample.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace fsma::evalmetrics {

struct EvalSpec {
    NmeSpec nme = NmeSpec::ibug68();
    F1Spec f1 = F1Spec::helen11();
    std::int64_t batch_size = 16;
};

nlohmann::json to_json(const EvalSpec& spec);
void merge(JsonReader reader, EvalSpec& spec);

struct ImageMetrics {
    double l1 = 0.0;
    double ssim = 0.0;
};

/// Metrics for one model on one split; the populated member follows the task.
struct MetricReport {
    model::TaskKind task = model::TaskKind::segmentation;
    std::int64_t count = 0;
    std::optional<NmeResult> nme;
    std::optional<F1Report> f1;
    std::optional<ImageMetrics> image;

    /// Overall F1, all-NME, or image L1.
    double primary() const;
    std::string primary_name() const;
};

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);
std::string to_text(const MetricReport& r);

/// Task outputs in evaluation form: decoded points at input resolution,
/// argmax label masks, or output images.
struct Predictions {
    std::vector<PointSet> points;
    std::vector<torch::Tensor> masks;
    std::vector<torch::Tensor> images;
};

Predictions predict(const model::ModelBundle& model, const taskdata::SampleSet& samples, std::int64_t batch_size = 16);

/// Scores predictions against the samples' annotations. Masks whose size
/// differs from the ground truth are resized with nearest-neighbour sampling.
/// F1 counts are pooled over the whole split before computing scores.
MetricReport score(model::TaskKind task, const Predictions& predictions, const taskdata::SampleSet& samples,
                   const EvalSpec& spec);

MetricReport evaluate(const model::ModelBundle& model, const taskdata::SampleSet& samples, const EvalSpec& spec = {});

} // namespace fsma::evalmetrics
