#include "fsma/objectives/losses.hpp"

#include "fsma/common/errors.hpp"

#include <cmath>
#include <cstdio>

namespace fsma::objectives {

namespace F = torch::nn::functional;

namespace {

void require_same_shape(const char* what, const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) throw ValidationError(std::string(what) + ": shape mismatch");
}

} // namespace

void LossWeights::validate() const {
    for (double w : {lambda1, lambda2, lambda3, lambda4}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and nonnegative");
    }
}

nlohmann::json to_json(const LossWeights& w) {
    return {{"lambda1", w.lambda1}, {"lambda2", w.lambda2}, {"lambda3", w.lambda3}, {"lambda4", w.lambda4}};
}

void merge(JsonReader reader, LossWeights& w) {
    reader.read("lambda1", w.lambda1);
    reader.read("lambda2", w.lambda2);
    reader.read("lambda3", w.lambda3);
    reader.read("lambda4", w.lambda4);
    reader.finish();
    w.validate();
}

std::string LossReport::to_log_line() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "rec=%.9g adv=%.9g enc=%.9g ssim_term=%.9g total=%.9g", rec, adv, enc, ssim_term, total);
    return buf;
}

LossReport unsup_objective(const LossWeights& w, const UnsupParts& parts) {
    w.validate();
    for (double v : {parts.rec, parts.adv, parts.enc, parts.ssim_value}) {
        if (!std::isfinite(v)) throw ValidationError("unsup_objective: non-finite loss part");
    }
    LossReport r;
    r.rec = parts.rec;
    r.adv = parts.adv;
    r.enc = parts.enc;
    r.ssim_term = 1.0 - parts.ssim_value;
    r.total = unsup_total(w, parts.rec, parts.adv, parts.enc, parts.ssim_value);
    return r;
}

torch::Tensor l1_rec(const torch::Tensor& x, const torch::Tensor& xhat) {
    require_same_shape("l1_rec", x, xhat);
    return (x - xhat).abs().mean();
}

torch::Tensor heatmap_l2(const torch::Tensor& pred, const torch::Tensor& gt) {
    require_same_shape("heatmap_l2", pred, gt);
    auto d = pred - gt;
    return (d * d).mean();
}

torch::Tensor seg_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels, std::int64_t ignore_index) {
    if (logits.dim() != 4 || labels.dim() != 3 || logits.size(0) != labels.size(0) ||
        logits.size(2) != labels.size(1) || logits.size(3) != labels.size(2)) {
        throw ValidationError("seg_cross_entropy: expected N x K x H x W logits and N x H x W labels");
    }
    const auto classes = logits.size(1);
    auto valid = labels != ignore_index;
    const auto count = valid.sum().item<std::int64_t>();
    if (count == 0) throw ValidationError("seg_cross_entropy: every pixel carries the ignore label");
    auto kept = labels.masked_select(valid);
    if ((kept < 0).any().item<bool>() || (kept >= classes).any().item<bool>()) {
        throw ValidationError("seg_cross_entropy: label outside [0, " + std::to_string(classes) + ")");
    }
    return F::cross_entropy(logits, labels.to(torch::kInt64),
                            F::CrossEntropyFuncOptions().ignore_index(ignore_index).reduction(torch::kMean));
}

TaskLoss task_objective(const model::TaskSpec& task, const torch::Tensor& output, const torch::Tensor& target,
                        Discriminator* disc, const LossWeights& weights, std::int64_t ignore_index) {
    TaskLoss loss;
    switch (task.kind) {
    case model::TaskKind::landmarks:
        loss.total = heatmap_l2(output, target);
        loss.components.emplace_back("heatmap_l2", loss.total);
        break;
    case model::TaskKind::segmentation:
        loss.total = seg_cross_entropy(output, target, ignore_index);
        loss.components.emplace_back("cross_entropy", loss.total);
        break;
    case model::TaskKind::stylization:
    case model::TaskKind::shadow_removal:
    case model::TaskKind::reconstruction: {
        if (disc == nullptr) throw ValidationError("task_objective: " + model::to_string(task.kind) + " needs a discriminator");
        auto rec = l1_rec(target, output);
        auto adv = generator_loss(*disc, output);
        loss.total = weights.lambda1 * rec + weights.lambda2 * adv;
        loss.components.emplace_back("rec", rec);
        loss.components.emplace_back("adv", adv);
        break;
    }
    }
    return loss;
}

} // namespace fsma::objectives
