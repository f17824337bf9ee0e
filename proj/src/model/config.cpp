#include "fsma/model/config.hpp"

#include "fsma/common/errors.hpp"

#include <algorithm>

namespace fsma::model {

BackboneConfig BackboneConfig::toy() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::resnet18() {
    BackboneConfig cfg;
    cfg.input_size = 128;
    cfg.base_channels = 64;
    cfg.blocks_per_stage = 2;
    cfg.latent_grid = 4;
    return cfg;
}

void BackboneConfig::validate() const {
    if (num_scales < 1 || num_scales > 8) throw ValidationError("backbone: num_scales must be in [1, 8]");
    if (input_size <= 0 || input_size % deepest_stride() != 0) {
        throw ValidationError("backbone: input_size " + std::to_string(input_size) + " is not divisible by 2^" +
                              std::to_string(num_scales));
    }
    if (latent_dim <= 0) throw ValidationError("backbone: latent_dim must be positive");
    if (base_channels <= 0) throw ValidationError("backbone: base_channels must be positive");
    if (blocks_per_stage <= 0) throw ValidationError("backbone: blocks_per_stage must be positive");
    if (latent_grid <= 0) throw ValidationError("backbone: latent_grid must be positive");
}

std::int64_t BackboneConfig::width_at(std::int64_t exponent) const {
    return base_channels << std::max<std::int64_t>(0, exponent - 2);
}

BackboneConfig BackboneConfig::with_input_size(std::int64_t size) const {
    BackboneConfig cfg = *this;
    cfg.input_size = size;
    return cfg;
}

bool BackboneConfig::same_architecture(const BackboneConfig& other) const {
    return latent_dim == other.latent_dim && base_channels == other.base_channels && num_scales == other.num_scales &&
           blocks_per_stage == other.blocks_per_stage && latent_grid == other.latent_grid;
}

nlohmann::json to_json(const BackboneConfig& cfg) {
    return {{"input_size", cfg.input_size},       {"latent_dim", cfg.latent_dim},
            {"base_channels", cfg.base_channels}, {"num_scales", cfg.num_scales},
            {"blocks_per_stage", cfg.blocks_per_stage}, {"latent_grid", cfg.latent_grid}};
}

void merge(JsonReader reader, BackboneConfig& cfg) {
    reader.read("input_size", cfg.input_size);
    reader.read("latent_dim", cfg.latent_dim);
    reader.read("base_channels", cfg.base_channels);
    reader.read("num_scales", cfg.num_scales);
    reader.read("blocks_per_stage", cfg.blocks_per_stage);
    reader.read("latent_grid", cfg.latent_grid);
    reader.finish();
}

std::string to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::landmarks: return "landmarks";
    case TaskKind::segmentation: return "segmentation";
    case TaskKind::stylization: return "stylization";
    case TaskKind::shadow_removal: return "shadow_removal";
    case TaskKind::reconstruction: return "reconstruction";
    }
    return "unknown";
}

TaskKind parse_task_kind(const std::string& text) {
    if (text == "landmarks") return TaskKind::landmarks;
    if (text == "segmentation") return TaskKind::segmentation;
    if (text == "stylization") return TaskKind::stylization;
    if (text == "shadow_removal" || text == "shadow-removal") return TaskKind::shadow_removal;
    if (text == "reconstruction") return TaskKind::reconstruction;
    throw ValidationError("unknown task kind '" + text + "'");
}

bool is_image_task(TaskKind kind) {
    return kind == TaskKind::stylization || kind == TaskKind::shadow_removal || kind == TaskKind::reconstruction;
}

TaskSpec TaskSpec::make(TaskKind kind, std::int64_t out_channels) {
    TaskSpec spec;
    spec.kind = kind;
    spec.out_channels = out_channels;
    spec.resolution = kind == TaskKind::landmarks ? OutputResolution::half : OutputResolution::full;
    spec.validate();
    return spec;
}

void TaskSpec::validate() const {
    if (out_channels <= 0) throw ValidationError("task: out_channels must be positive");
    if ((kind == TaskKind::landmarks) != (resolution == OutputResolution::half)) {
        throw ValidationError("task: landmark heads run at half resolution, all other tasks at full resolution");
    }
    if (is_image_task(kind) && out_channels != 3) throw ValidationError("task: image tasks produce 3 channels");
    if (kind == TaskKind::segmentation && out_channels < 2) throw ValidationError("task: segmentation needs >= 2 classes");
}

std::int64_t TaskSpec::decoder_levels(std::int64_t num_scales) const {
    return resolution == OutputResolution::half ? num_scales - 1 : num_scales;
}

nlohmann::json to_json(const TaskSpec& task) {
    return {{"kind", to_string(task.kind)},
            {"out_channels", task.out_channels},
            {"resolution", task.resolution == OutputResolution::half ? "half" : "full"}};
}

TaskSpec task_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("out_channels")) {
        throw ValidationError("task: expected an object with 'kind' and 'out_channels'");
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "kind" && key != "out_channels" && key != "resolution") throw ValidationError("task: unknown key '" + key + "'");
    }
    TaskSpec spec;
    try {
        spec = TaskSpec::make(parse_task_kind(j.at("kind").get<std::string>()), j.at("out_channels").get<std::int64_t>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("task: ") + e.what());
    }
    if (j.contains("resolution")) {
        const auto res = j.at("resolution").get<std::string>();
        if ((res == "half") != (spec.resolution == OutputResolution::half)) {
            throw ValidationError("task: resolution '" + res + "' does not match task kind");
        }
    }
    return spec;
}

std::string to_string(SkipNorm norm) { return norm == SkipNorm::batch ? "batch" : "instance"; }

SkipNorm parse_skip_norm(const std::string& text) {
    if (text == "batch") return SkipNorm::batch;
    if (text == "instance") return SkipNorm::instance;
    throw ValidationError("unknown skip-layer normalisation '" + text + "'");
}

} // namespace fsma::model
