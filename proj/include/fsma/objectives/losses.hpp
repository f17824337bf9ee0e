#pragma once

#include "fsma/common/json_reader.hpp"
#include "fsma/model/config.hpp"
#include "fsma/objectives/discriminators.hpp"

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

namespace fsma::objectives {

/// Weights of reconstruction, image-adversarial, latent-prior and SSIM terms.
struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    double lambda3 = 1.0;
    double lambda4 = 60.0;

    void validate() const;
};

nlohmann::json to_json(const LossWeights& w);
void merge(JsonReader reader, LossWeights& w);

/// Per-term values of one unsupervised step.
struct LossReport {
    double rec = 0.0;
    double adv = 0.0;
    double enc = 0.0;
    double ssim_term = 0.0;
    double total = 0.0;

    /// "rec=... adv=... enc=... ssim_term=... total=..." on one line.
    std::string to_log_line() const;
};

struct UnsupParts {
    double rec = 0.0;
    double adv = 0.0;
    double enc = 0.0;
    double ssim_value = 1.0;
};

/// Weighted objective. SSIM enters as (1 - ssim) so the total stays nonnegative.
template <typename T>
T unsup_total(const LossWeights& w, const T& rec, const T& adv, const T& enc, const T& ssim_value) {
    return w.lambda1 * rec + w.lambda2 * adv + w.lambda3 * enc + w.lambda4 * (1.0 - ssim_value);
}

/// Throws ValidationError on negative weights or non-finite parts.
LossReport unsup_objective(const LossWeights& w, const UnsupParts& parts);

/// Mean absolute deviation. Subgradient 0 where x == xhat.
torch::Tensor l1_rec(const torch::Tensor& x, const torch::Tensor& xhat);

/// Mean squared deviation between heatmap stacks.
torch::Tensor heatmap_l2(const torch::Tensor& pred, const torch::Tensor& gt);

inline constexpr std::int64_t kDefaultIgnoreIndex = 255;

/// Mean negative log-likelihood over pixels whose label is not ignore_index.
/// logits: N x K x H x W; labels: N x H x W (int64).
/// Throws ValidationError on out-of-range labels or when every pixel is ignored.
torch::Tensor seg_cross_entropy(const torch::Tensor& logits, const torch::Tensor& labels,
                                std::int64_t ignore_index = kDefaultIgnoreIndex);

struct TaskLoss {
    torch::Tensor total;
    std::vector<std::pair<std::string, torch::Tensor>> components;
};

/// Adaptation objective by task kind: heatmap L2 for landmarks, cross-entropy
/// for segmentation, lambda1 * L1 + lambda2 * generator loss for image tasks.
/// `disc` is required for image tasks (ValidationError otherwise).
TaskLoss task_objective(const model::TaskSpec& task, const torch::Tensor& output, const torch::Tensor& target,
                        Discriminator* disc, const LossWeights& weights = {},
                        std::int64_t ignore_index = kDefaultIgnoreIndex);

} // namespace fsma::objectives
