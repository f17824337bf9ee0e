#include "fsma/trainer/adapt.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/rng.hpp"
#include "fsma/objectives/losses.hpp"
#include "fsma/taskdata/heatmaps.hpp"
#include "fsma/trainer/augment.hpp"
#include "fsma/trainer/pretrain.hpp"
#include "fsma/trainer/training_log.hpp"

#include <algorithm>
#include <numeric>

namespace fsma::trainer {

using model::TaskKind;
using namespace taskdata;

namespace {

constexpr std::uint64_t kStreamOrder = 11;
constexpr std::uint64_t kStreamAugment = 12;
constexpr std::uint64_t kStreamHead = 13;
constexpr std::uint64_t kStreamDisc = 14;

const char* expected_annotation(TaskKind kind) {
    switch (kind) {
    case TaskKind::landmarks: return "landmark points";
    case TaskKind::segmentation: return "a class mask";
    case TaskKind::stylization: return "a target image";
    case TaskKind::shadow_removal: return "a shadow pair";
    case TaskKind::reconstruction: return "nothing";
    }
    return "?";
}

bool annotation_fits(TaskKind kind, const Annotation& a) {
    switch (kind) {
    case TaskKind::landmarks: return std::holds_alternative<LandmarkAnnotation>(a);
    case TaskKind::segmentation: return std::holds_alternative<ClassMaskAnnotation>(a);
    case TaskKind::stylization: return std::holds_alternative<TargetImageAnnotation>(a);
    case TaskKind::shadow_removal: return std::holds_alternative<ShadowAnnotation>(a);
    case TaskKind::reconstruction: return true;
    }
    return false;
}

} // namespace

void check_samples(const model::TaskSpec& task, const SampleSet& samples, std::int64_t input_size) {
    for (const auto& s : samples) {
        if (s.image.dim() != 3 || s.image.size(0) != 3 || s.height() != input_size || s.width() != input_size) {
            throw ValidationError("sample '" + s.id + "' must be 3 x " + std::to_string(input_size) + " x " +
                                  std::to_string(input_size) + " to match the backbone");
        }
        if (!annotation_fits(task.kind, s.annotation)) {
            throw ValidationError("sample '" + s.id + "' does not carry " + expected_annotation(task.kind));
        }
        if (const auto* lm = std::get_if<LandmarkAnnotation>(&s.annotation)) {
            if (static_cast<std::int64_t>(lm->points.size()) != task.out_channels) {
                throw ValidationError("sample '" + s.id + "' has " + std::to_string(lm->points.size()) +
                                      " landmarks; the task expects " + std::to_string(task.out_channels));
            }
        }
        if (const auto* cm = std::get_if<ClassMaskAnnotation>(&s.annotation)) {
            if (cm->num_classes != task.out_channels) {
                throw ValidationError("sample '" + s.id + "' has " + std::to_string(cm->num_classes) +
                                      " classes; the task expects " + std::to_string(task.out_channels));
            }
        }
    }
}

torch::Tensor build_targets(const model::TaskSpec& task, const SampleSet& batch, const HeatmapConfig& heatmap,
                            std::int64_t input_size) {
    std::vector<torch::Tensor> targets;
    for (const auto& s : batch) {
        switch (task.kind) {
        case TaskKind::landmarks: {
            const auto out = input_size / 2;
            targets.push_back(render_heatmaps(std::get<LandmarkAnnotation>(s.annotation).points, out, out, heatmap,
                                              input_size, input_size)
                                  .maps);
            break;
        }
        case TaskKind::segmentation: targets.push_back(std::get<ClassMaskAnnotation>(s.annotation).labels); break;
        case TaskKind::stylization: targets.push_back(std::get<TargetImageAnnotation>(s.annotation).target); break;
        case TaskKind::shadow_removal: targets.push_back(std::get<ShadowAnnotation>(s.annotation).clean); break;
        case TaskKind::reconstruction: targets.push_back(s.image); break;
        }
    }
    return torch::stack(targets);
}

AdaptResult run_adapt(const AdaptConfig& cfg, const model::Checkpoint& pretrained, const SampleSet& fewshot,
                      const AdaptOutputs& outputs) {
    cfg.validate();
    if (fewshot.empty()) throw ValidationError("adapt: few-shot set is empty");
    auto base = model::restore_bundle(pretrained);
    if (base.adapted()) throw ValidationError("adapt: checkpoint already carries a task head; pass a pretrained one");
    const auto& bcfg = base.config();
    const auto mask = model::SkipMask::parse(cfg.mask, static_cast<std::size_t>(cfg.task.decoder_levels(bcfg.num_scales)));
    check_samples(cfg.task, fewshot, bcfg.input_size);
    configure_threads(cfg.deterministic);

    AdaptResult result{model::attach_head(std::move(base), cfg.task, mask, derive_seed(cfg.seed, kStreamHead),
                                          cfg.skip_norm),
                       {}, {}, {}};
    auto& net = result.model;
    const bool adversarial = model::is_image_task(cfg.task.kind);
    std::shared_ptr<objectives::ImageDiscriminator> disc;
    std::unique_ptr<torch::optim::Adam> disc_opt;
    const auto adam = torch::optim::AdamOptions(cfg.optimizer.lr)
                          .betas({cfg.optimizer.beta1, cfg.optimizer.beta2})
                          .amsgrad(cfg.optimizer.amsgrad);
    if (adversarial) {
        torch::manual_seed(derive_seed(cfg.seed, kStreamDisc));
        disc = std::make_shared<objectives::ImageDiscriminator>(cfg.image_disc);
        disc->train();
        disc_opt = std::make_unique<torch::optim::Adam>(disc->parameters(), adam);
    }

    result.initial = model::make_checkpoint(net, "adapt", 0);
    result.initial.manifest.extra["config"] = to_json(cfg);
    if (!outputs.initial_checkpoint.empty()) model::save_checkpoint(outputs.initial_checkpoint, result.initial);

    torch::optim::Adam opt(net.trainable_parameters(), adam);
    TrainingLog log(outputs.log, cfg.deterministic);
    log.note("adapt task=" + model::to_string(cfg.task.kind) + " mask=" + mask.to_string() +
             " seed=" + std::to_string(cfg.seed) + " samples=" + std::to_string(fewshot.size()));

    Rng order_rng(derive_seed(cfg.seed, kStreamOrder));
    Rng aug_rng(derive_seed(cfg.seed, kStreamAugment));
    net.set_training(true);
    std::int64_t step = 0;
    const std::int64_t epochs = cfg.epochs > 0 ? cfg.epochs : std::numeric_limits<std::int64_t>::max();
    const auto total_steps = planned_steps(fewshot.size(), cfg.batch_size, cfg.epochs, cfg.max_steps);
    bool done = false;
    for (std::int64_t epoch = 0; epoch < epochs && !done; ++epoch) {
        std::vector<std::size_t> order(fewshot.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
        for (const auto& [begin, end] : batch_ranges(order.size(), cfg.batch_size)) {
            SampleSet batch;
            for (auto i = begin; i < end; ++i) batch.push_back(augment(fewshot[order[i]], cfg.augment, aug_rng));
            const auto x = stack_images(batch);
            const auto target = build_targets(cfg.task, batch, cfg.heatmap, bcfg.input_size);
            const auto output = model::forward_task(net, x);
            const auto lr = scheduled_lr(cfg.optimizer, step, total_steps);
            set_learning_rate(opt, lr);
            if (disc_opt) set_learning_rate(*disc_opt, lr);

            AdaptStep rec;
            rec.step = step;
            if (adversarial) {
                disc_opt->zero_grad();
                const auto d = objectives::discriminator_loss(*disc, target, output);
                d.backward();
                disc_opt->step();
                rec.d_loss = d.item<double>();
            }
            opt.zero_grad();
            const auto loss = objectives::task_objective(cfg.task, output, target, disc.get(), cfg.weights,
                                                         cfg.ignore_index);
            loss.total.backward();
            opt.step();

            rec.total = loss.total.item<double>();
            std::string fields = "total=" + fmt_num(rec.total);
            for (const auto& [name, value] : loss.components) {
                rec.components.emplace_back(name, value.item<double>());
                fields += " " + name + "=" + fmt_num(rec.components.back().second);
            }
            if (adversarial) fields += " d_loss=" + fmt_num(rec.d_loss);
            log.record(step, fields, lr);
            result.history.push_back(std::move(rec));
            ++step;
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                done = true;
                break;
            }
        }
    }

    net.set_training(false);
    result.checkpoint = model::make_checkpoint(net, "adapt", step);
    result.checkpoint.manifest.extra["config"] = to_json(cfg);
    if (disc) model::append_module_state(result.checkpoint, "disc_img", *disc);
    if (!outputs.checkpoint.empty()) model::save_checkpoint(outputs.checkpoint, result.checkpoint);
    return result;
}

} // namespace fsma::trainer
