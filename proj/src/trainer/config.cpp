#include "fsma/trainer/config.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/model/skip_mask.hpp"
#include "fsma/taskdata/faces.hpp"

#include <algorithm>
#include <cmath>

namespace fsma::trainer {

using model::TaskKind;

std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::cosine ? "cosine" : "constant"; }

LrSchedule parse_lr_schedule(const std::string& text) {
    if (text == "constant") return LrSchedule::constant;
    if (text == "cosine") return LrSchedule::cosine;
    throw ValidationError("optimizer: unknown schedule '" + text + "' (expected constant or cosine)");
}

double scheduled_lr(const OptimizerConfig& cfg, std::int64_t t, std::int64_t total) {
    if (cfg.schedule == LrSchedule::constant || total <= 0) return cfg.lr;
    const double progress = std::clamp(static_cast<double>(t) / static_cast<double>(total), 0.0, 1.0);
    return cfg.lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("optimizer: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optimizer: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("optimizer: beta2 must be in [0, 1)");
}

void AugmentSpec::validate() const {
    if (!(max_rotation_deg >= 0.0 && max_rotation_deg <= 180.0)) {
        throw ValidationError("augment: max_rotation_deg must be in [0, 180]");
    }
    if (!(max_translation >= 0.0 && max_translation < 1.0)) {
        throw ValidationError("augment: max_translation must be in [0, 1)");
    }
    if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ValidationError("augment: need 0 < scale_min <= scale_max");
    for (std::size_t i = 0; i < point_swap.size(); ++i) {
        const auto j = point_swap[i];
        if (j < 0 || j >= static_cast<std::int64_t>(point_swap.size()) || point_swap[j] != static_cast<std::int64_t>(i)) {
            throw ValidationError("augment: point_swap must be an involution over its indices");
        }
    }
    for (std::size_t i = 0; i < class_swap.size(); ++i) {
        const auto j = class_swap[i];
        if (j < 0 || j >= static_cast<std::int64_t>(class_swap.size()) || class_swap[j] != static_cast<std::int64_t>(i)) {
            throw ValidationError("augment: class_swap must be an involution over its indices");
        }
    }
}

PretrainConfig PretrainConfig::toy() {
    PretrainConfig cfg;
    cfg.backbone = model::BackboneConfig::toy();
    cfg.phases = {PretrainPhase{64, 1000000, 8, 2000}};
    cfg.optimizer = {1e-3, 0.0, 0.999, false, LrSchedule::cosine};
    return cfg;
}

PretrainConfig PretrainConfig::full_scale() {
    PretrainConfig cfg;
    cfg.backbone = model::BackboneConfig::resnet18();
    cfg.phases = {PretrainPhase{128, 50, 100, 0}, PretrainPhase{256, 50, 50, 0}};
    cfg.optimizer = {2e-5, 0.0, 0.999, false};
    cfg.augment.enabled = true;
    return cfg;
}

void PretrainConfig::validate() const {
    backbone.validate();
    if (phases.empty()) throw ValidationError("pretrain: phases must be nonempty");
    std::int64_t previous = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& p = phases[i];
        const auto where = "pretrain: phase " + std::to_string(i);
        if (p.resolution <= previous) throw ValidationError(where + ": resolutions must be strictly ascending");
        if (p.resolution % backbone.deepest_stride() != 0) {
            throw ValidationError(where + ": resolution not divisible by " + std::to_string(backbone.deepest_stride()));
        }
        if (p.epochs <= 0) throw ValidationError(where + ": epochs must be positive");
        if (p.batch_size <= 0) throw ValidationError(where + ": batch_size must be positive");
        if (p.max_steps < 0) throw ValidationError(where + ": max_steps must be >= 0");
        previous = p.resolution;
    }
    optimizer.validate();
    weights.validate();
    ssim.validate();
    if (latent_hidden <= 0) throw ValidationError("pretrain: latent_hidden must be positive");
    augment.validate();
}

AdaptConfig AdaptConfig::defaults_for(const model::TaskSpec& task) {
    AdaptConfig cfg;
    cfg.task = task;
    const auto levels = static_cast<std::size_t>(task.decoder_levels(model::BackboneConfig{}.num_scales));
    cfg.mask = std::string(levels, '0');
    if (model::is_image_task(task.kind)) {
        cfg.optimizer = {1e-4, 0.5, 0.999, false};
    } else {
        cfg.optimizer = {1e-2, 0.9, 0.999, false};
    }
    return cfg;
}

AdaptConfig AdaptConfig::toy(const model::TaskSpec& task) {
    auto cfg = defaults_for(task);
    if (!model::is_image_task(task.kind)) cfg.optimizer.lr = 1e-3;
    cfg.max_steps = 300;
    cfg.batch_size = 8;
    cfg.optimizer.schedule = LrSchedule::cosine;
    return cfg;
}

AdaptConfig AdaptConfig::full_scale(const model::TaskSpec& task, std::size_t n) {
    auto cfg = defaults_for(task);
    cfg.max_steps = 0;
    cfg.augment.enabled = true;
    auto mirror_tables = [&] {
        cfg.augment.mirror = false;
        if (task.kind == TaskKind::landmarks && task.out_channels == taskdata::kFaceLandmarks) {
            cfg.augment.point_swap = taskdata::face_landmark_mirror();
            cfg.augment.mirror = true;
        } else if (task.kind == TaskKind::segmentation && task.out_channels == taskdata::kFaceClasses) {
            cfg.augment.class_swap = taskdata::face_class_mirror();
            cfg.augment.mirror = true;
        }
    };
    switch (task.kind) {
    case TaskKind::landmarks:
        if (n <= 20) {
            // customized landmarks: one batch per epoch, no augmentation
            cfg.epochs = 1000;
            cfg.batch_size = static_cast<std::int64_t>(std::max<std::size_t>(n, 1));
            cfg.optimizer.amsgrad = true;
            cfg.skip_norm = model::SkipNorm::instance;
            cfg.augment.enabled = false;
        } else {
            cfg.batch_size = 20;
            cfg.epochs = n >= 3148 ? 100 : n >= 630 ? 500 : 900;
            mirror_tables();
        }
        break;
    case TaskKind::segmentation:
        if (task.out_channels == taskdata::kFaceClasses) {
            // Helen label set, budgets by fraction of the 2000-image training split
            cfg.batch_size = n > 10 ? 50 : 10;
            cfg.epochs = n >= 2000 ? 100 : n >= 500 ? 500 : n > 10 ? 2000 : 5000;
        } else {
            cfg.batch_size = 5;
            cfg.epochs = n >= 100 ? 500 : n >= 50 ? 1000 : n >= 25 ? 1600 : 2000;
        }
        mirror_tables();
        break;
    case TaskKind::stylization:
        cfg.batch_size = 5;
        cfg.epochs = n >= 25 ? 400 : n >= 15 ? 500 : 600;
        cfg.augment.mirror = true;
        break;
    default:
        cfg.batch_size = 25;
        cfg.epochs = 300;
        cfg.augment.mirror = true;
        break;
    }
    return cfg;
}

void AdaptConfig::validate() const {
    task.validate();
    if (task.kind == TaskKind::reconstruction) throw ValidationError("adapt: reconstruction is not an adaptation task");
    if (mask.empty()) throw ValidationError("adapt: mask must be nonempty");
    if (max_steps < 0 || epochs < 0) throw ValidationError("adapt: max_steps and epochs must be >= 0");
    if (max_steps == 0 && epochs == 0) throw ValidationError("adapt: one of max_steps or epochs must be positive");
    if (batch_size <= 0) throw ValidationError("adapt: batch_size must be positive");
    optimizer.validate();
    augment.validate();
    weights.validate();
    heatmap.validate();
    if (augment.enabled && augment.mirror) {
        if (task.kind == TaskKind::landmarks &&
            static_cast<std::int64_t>(augment.point_swap.size()) != task.out_channels) {
            throw ValidationError("adapt: mirroring landmarks needs a point_swap table with one entry per landmark");
        }
        if (task.kind == TaskKind::segmentation &&
            static_cast<std::int64_t>(augment.class_swap.size()) != task.out_channels) {
            throw ValidationError("adapt: mirroring segmentation needs a class_swap table with one entry per class");
        }
    }
}

nlohmann::json to_json(const OptimizerConfig& cfg) {
    return {{"lr", cfg.lr}, {"beta1", cfg.beta1}, {"beta2", cfg.beta2}, {"amsgrad", cfg.amsgrad},
            {"schedule", to_string(cfg.schedule)}};
}

void merge(JsonReader reader, OptimizerConfig& cfg) {
    reader.read("lr", cfg.lr);
    reader.read("beta1", cfg.beta1);
    reader.read("beta2", cfg.beta2);
    reader.read("amsgrad", cfg.amsgrad);
    if (reader.has("schedule")) cfg.schedule = parse_lr_schedule(reader.require<std::string>("schedule"));
    reader.finish();
}

nlohmann::json to_json(const AugmentSpec& spec) {
    return {{"enabled", spec.enabled},
            {"mirror", spec.mirror},
            {"point_swap", spec.point_swap},
            {"class_swap", spec.class_swap},
            {"max_rotation_deg", spec.max_rotation_deg},
            {"max_translation", spec.max_translation},
            {"scale_min", spec.scale_min},
            {"scale_max", spec.scale_max}};
}

void merge(JsonReader reader, AugmentSpec& spec) {
    reader.read("enabled", spec.enabled);
    reader.read("mirror", spec.mirror);
    reader.read("point_swap", spec.point_swap);
    reader.read("class_swap", spec.class_swap);
    reader.read("max_rotation_deg", spec.max_rotation_deg);
    reader.read("max_translation", spec.max_translation);
    reader.read("scale_min", spec.scale_min);
    reader.read("scale_max", spec.scale_max);
    reader.finish();
}

namespace {

nlohmann::json to_json_disc(const objectives::ImageDiscriminatorOptions& o) {
    return {{"base_channels", o.base_channels}, {"downsamplings", o.downsamplings}};
}

void merge_disc(JsonReader reader, objectives::ImageDiscriminatorOptions& o) {
    reader.read("base_channels", o.base_channels);
    reader.read("downsamplings", o.downsamplings);
    reader.finish();
    if (o.base_channels <= 0 || o.downsamplings < 0) throw ValidationError("image_disc: invalid options");
}

nlohmann::json to_json_ssim(const objectives::SsimConfig& s) {
    return {{"window_size", s.window_size}, {"window_sigma", s.window_sigma}, {"c1", s.c1}, {"c2", s.c2}};
}

void merge_ssim(JsonReader reader, objectives::SsimConfig& s) {
    reader.read("window_size", s.window_size);
    reader.read("window_sigma", s.window_sigma);
    reader.read("c1", s.c1);
    reader.read("c2", s.c2);
    reader.finish();
}

} // namespace

nlohmann::json to_json(const PretrainConfig& cfg) {
    auto phases = nlohmann::json::array();
    for (const auto& p : cfg.phases) {
        phases.push_back({{"resolution", p.resolution},
                          {"epochs", p.epochs},
                          {"batch_size", p.batch_size},
                          {"max_steps", p.max_steps}});
    }
    return {{"backbone", model::to_json(cfg.backbone)},
            {"phases", phases},
            {"optimizer", to_json(cfg.optimizer)},
            {"weights", objectives::to_json(cfg.weights)},
            {"ssim", to_json_ssim(cfg.ssim)},
            {"image_disc", to_json_disc(cfg.image_disc)},
            {"latent_hidden", cfg.latent_hidden},
            {"augment", to_json(cfg.augment)},
            {"seed", cfg.seed},
            {"deterministic", cfg.deterministic}};
}

void merge(JsonReader reader, PretrainConfig& cfg) {
    if (reader.has("backbone")) model::merge(reader.child("backbone"), cfg.backbone);
    if (reader.has("phases")) {
        const auto& arr = reader.raw("phases");
        if (!arr.is_array()) throw ValidationError("pretrain.phases: expected an array");
        cfg.phases.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            PretrainPhase p;
            JsonReader r(arr[i], "pretrain.phases[" + std::to_string(i) + "]");
            r.read("resolution", p.resolution);
            r.read("epochs", p.epochs);
            r.read("batch_size", p.batch_size);
            r.read("max_steps", p.max_steps);
            r.finish();
            cfg.phases.push_back(p);
        }
    }
    if (reader.has("optimizer")) merge(reader.child("optimizer"), cfg.optimizer);
    if (reader.has("weights")) objectives::merge(reader.child("weights"), cfg.weights);
    if (reader.has("ssim")) merge_ssim(reader.child("ssim"), cfg.ssim);
    if (reader.has("image_disc")) merge_disc(reader.child("image_disc"), cfg.image_disc);
    reader.read("latent_hidden", cfg.latent_hidden);
    if (reader.has("augment")) merge(reader.child("augment"), cfg.augment);
    reader.read("seed", cfg.seed);
    reader.read("deterministic", cfg.deterministic);
    reader.finish();
}

nlohmann::json to_json(const AdaptConfig& cfg) {
    return {{"task", model::to_json(cfg.task)},
            {"mask", cfg.mask},
            {"skip_norm", model::to_string(cfg.skip_norm)},
            {"epochs", cfg.epochs},
            {"max_steps", cfg.max_steps},
            {"batch_size", cfg.batch_size},
            {"optimizer", to_json(cfg.optimizer)},
            {"augment", to_json(cfg.augment)},
            {"weights", objectives::to_json(cfg.weights)},
            {"heatmap_sigma", cfg.heatmap.sigma},
            {"image_disc", to_json_disc(cfg.image_disc)},
            {"ignore_index", cfg.ignore_index},
            {"seed", cfg.seed},
            {"deterministic", cfg.deterministic}};
}

void merge(JsonReader reader, AdaptConfig& cfg) {
    if (reader.has("task")) {
        const auto task = model::task_from_json(reader.raw("task"));
        const auto keep_seed = cfg.seed;
        cfg = AdaptConfig::defaults_for(task);
        cfg.seed = keep_seed;
    }
    reader.read("mask", cfg.mask);
    if (reader.has("skip_norm")) cfg.skip_norm = model::parse_skip_norm(reader.require<std::string>("skip_norm"));
    reader.read("epochs", cfg.epochs);
    reader.read("max_steps", cfg.max_steps);
    reader.read("batch_size", cfg.batch_size);
    if (reader.has("optimizer")) merge(reader.child("optimizer"), cfg.optimizer);
    if (reader.has("augment")) merge(reader.child("augment"), cfg.augment);
    if (reader.has("weights")) objectives::merge(reader.child("weights"), cfg.weights);
    reader.read("heatmap_sigma", cfg.heatmap.sigma);
    if (reader.has("image_disc")) merge_disc(reader.child("image_disc"), cfg.image_disc);
    reader.read("ignore_index", cfg.ignore_index);
    reader.read("seed", cfg.seed);
    reader.read("deterministic", cfg.deterministic);
    reader.finish();
}

} // namespace fsma::trainer
