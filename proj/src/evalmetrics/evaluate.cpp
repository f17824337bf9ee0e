#include "fsma/evalmetrics/evaluate.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/objectives/ssim.hpp"
#include "fsma/taskdata/heatmaps.hpp"
#include "fsma/taskdata/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace fsma::evalmetrics {

using model::TaskKind;
using namespace taskdata;

nlohmann::json to_json(const EvalSpec& spec) {
    return {{"nme", to_json(spec.nme)}, {"f1", to_json(spec.f1)}, {"batch_size", spec.batch_size}};
}

void merge(JsonReader reader, EvalSpec& spec) {
    if (reader.has("nme")) spec.nme = nme_spec_from_json(reader.raw("nme"));
    if (reader.has("f1")) spec.f1 = f1_spec_from_json(reader.raw("f1"));
    reader.read("batch_size", spec.batch_size);
    reader.finish();
    if (spec.batch_size <= 0) throw ValidationError(reader.where("batch_size") + ": must be positive");
}

double MetricReport::primary() const {
    if (f1) return f1->overall;
    if (nme) return nme->all;
    if (image) return image->l1;
    return std::numeric_limits<double>::quiet_NaN();
}

std::string MetricReport::primary_name() const {
    if (f1) return "overall_f1";
    if (nme) return "nme_all";
    return "l1";
}

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j = {{"task", model::to_string(r.task)}, {"count", r.count}};
    if (r.nme) j["nme"] = to_json(*r.nme);
    if (r.f1) j["f1"] = to_json(*r.f1);
    if (r.image) j["image"] = {{"l1", r.image->l1}, {"ssim", r.image->ssim}};
    return j;
}

namespace {

double number_or_nan(const nlohmann::json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace

MetricReport metric_report_from_json(const nlohmann::json& j) {
    try {
        MetricReport r;
        r.task = model::parse_task_kind(j.at("task").get<std::string>());
        r.count = j.at("count").get<std::int64_t>();
        if (j.contains("nme")) {
            const auto& n = j.at("nme");
            r.nme = NmeResult{number_or_nan(n.at("inside")), number_or_nan(n.at("outline")), number_or_nan(n.at("all"))};
        }
        if (j.contains("f1")) {
            F1Report f;
            const auto& per = j.at("f1").at("per_class");
            std::vector<std::string> names;
            if (j.at("f1").contains("classes")) names = j.at("f1").at("classes").get<std::vector<std::string>>();
            else for (const auto& [name, _] : per.items()) names.push_back(name);
            for (const auto& name : names) {
                const auto& value = per.at(name);
                f.names.push_back(name);
                f.f1.push_back(value.is_null() ? std::nullopt : std::optional<double>(value.get<double>()));
            }
            f.overall = number_or_nan(j.at("f1").at("overall"));
            r.f1 = f;
        }
        if (j.contains("image")) r.image = ImageMetrics{j.at("image").at("l1").get<double>(), j.at("image").at("ssim").get<double>()};
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("metric report: ") + e.what());
    }
}

std::string to_text(const MetricReport& r) {
    std::string out = "task: " + model::to_string(r.task) + "\nsamples: " + std::to_string(r.count) + "\n";
    if (r.nme) out += "nme_inside: " + fmt(r.nme->inside) + "\nnme_outline: " + fmt(r.nme->outline) + "\nnme_all: " + fmt(r.nme->all) + "\n";
    if (r.f1) {
        for (std::size_t i = 0; i < r.f1->names.size(); ++i) {
            out += "f1_" + r.f1->names[i] + ": " + (r.f1->f1[i] ? fmt(*r.f1->f1[i]) : std::string("undefined")) + "\n";
        }
        out += "f1_overall: " + fmt(r.f1->overall) + "\n";
    }
    if (r.image) out += "l1: " + fmt(r.image->l1) + "\nssim: " + fmt(r.image->ssim) + "\n";
    return out;
}

Predictions predict(const model::ModelBundle& model, const SampleSet& samples, std::int64_t batch_size) {
    if (batch_size <= 0) throw ValidationError("predict: batch_size must be positive");
    const auto task = model.effective_task();
    const auto size = model.config().input_size;
    torch::NoGradGuard no_grad;
    Predictions p;
    for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
        std::vector<torch::Tensor> images;
        for (auto i = begin; i < end; ++i) images.push_back(samples[i].image);
        const auto out = model::forward_task(model, torch::stack(images));
        for (std::int64_t n = 0; n < out.size(0); ++n) {
            switch (task.kind) {
            case TaskKind::landmarks: p.points.push_back(decode_landmarks(out[n], size, size)); break;
            case TaskKind::segmentation: p.masks.push_back(out[n].argmax(0)); break;
            default: p.images.push_back(out[n].clamp(0.0, 1.0)); break;
            }
        }
    }
    return p;
}

MetricReport score(TaskKind task, const Predictions& predictions, const SampleSet& samples, const EvalSpec& spec) {
    if (samples.empty()) throw ValidationError("evaluate: no samples");
    MetricReport r;
    r.task = task;
    r.count = static_cast<std::int64_t>(samples.size());
    switch (task) {
    case TaskKind::landmarks: {
        if (predictions.points.size() != samples.size()) throw ValidationError("evaluate: prediction count mismatch");
        std::vector<NmeResult> per;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto* gt = std::get_if<LandmarkAnnotation>(&samples[i].annotation);
            if (!gt) throw ValidationError("evaluate: sample '" + samples[i].id + "' has no landmarks");
            per.push_back(nme(predictions.points[i], gt->points, spec.nme));
        }
        r.nme = mean_nme(per);
        break;
    }
    case TaskKind::segmentation: {
        if (predictions.masks.size() != samples.size()) throw ValidationError("evaluate: prediction count mismatch");
        F1Counts total;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto* gt = std::get_if<ClassMaskAnnotation>(&samples[i].annotation);
            if (!gt) throw ValidationError("evaluate: sample '" + samples[i].id + "' has no class mask");
            auto pred = predictions.masks[i];
            if (!pred.sizes().equals(gt->labels.sizes())) pred = resize_mask(pred, gt->labels.size(0), gt->labels.size(1));
            total += f1_counts(pred, gt->labels, spec.f1);
        }
        r.f1 = f1_from_counts(total, spec.f1);
        break;
    }
    default: {
        if (predictions.images.size() != samples.size()) throw ValidationError("evaluate: prediction count mismatch");
        double l1 = 0.0;
        double s = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            torch::Tensor target;
            if (const auto* t = std::get_if<TargetImageAnnotation>(&samples[i].annotation)) target = t->target;
            else if (const auto* sh = std::get_if<ShadowAnnotation>(&samples[i].annotation)) target = sh->clean;
            else if (task == TaskKind::reconstruction) target = samples[i].image;
            else throw ValidationError("evaluate: sample '" + samples[i].id + "' has no target image");
            auto pred = predictions.images[i];
            if (!pred.sizes().equals(target.sizes())) pred = resize_image(pred, target.size(1), target.size(2));
            l1 += (pred - target).abs().mean().item<double>();
            s += objectives::ssim(pred.unsqueeze(0), target.unsqueeze(0)).item<double>();
        }
        const double n = static_cast<double>(samples.size());
        r.image = ImageMetrics{l1 / n, s / n};
        break;
    }
    }
    return r;
}

MetricReport evaluate(const model::ModelBundle& model, const SampleSet& samples, const EvalSpec& spec) {
    return score(model.effective_task().kind, predict(model, samples, spec.batch_size), samples, spec);
}

} // namespace fsma::evalmetrics
