#include "fsma/cli/data_spec.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/taskdata/faces.hpp"
#include "fsma/taskdata/loaders.hpp"
#include "fsma/taskdata/style.hpp"

namespace fsma::cli {

using model::TaskKind;

nlohmann::json to_json(const DataSpec& spec) {
    nlohmann::json j = {{"path", spec.path.string()}};
    if (!spec.target.empty()) j["target"] = spec.target.string();
    if (!spec.style.empty()) j["style"] = spec.style;
    return j;
}

DataSpec data_spec_from_json(const nlohmann::json& j, const std::string& where) {
    DataSpec spec;
    if (j.is_string()) {
        spec.path = j.get<std::string>();
        return spec;
    }
    if (!j.is_object()) throw ValidationError(where + ": expected a path or an object");
    JsonReader r(j, where);
    std::string path;
    std::string target;
    r.read("path", path);
    r.read("target", target);
    r.read("style", spec.style);
    r.finish();
    spec.path = path;
    spec.target = target;
    return spec;
}

taskdata::SampleSet load_task_data(const model::TaskSpec& task, const DataSpec& data, std::int64_t size,
                                   std::int64_t ignore_index) {
    if (data.empty()) throw ValidationError("no data path given");
    if (!std::filesystem::exists(data.path)) throw ValidationError("data path '" + data.path.string() + "' does not exist");
    const taskdata::LoadOptions opts{size};
    switch (task.kind) {
    case TaskKind::landmarks: return taskdata::load_landmarks(data.path, task.out_channels, opts);
    case TaskKind::segmentation: return taskdata::load_segmentation(data.path, task.out_channels, ignore_index, opts);
    case TaskKind::stylization:
        if (!data.style.empty()) {
            if (!data.target.empty()) throw ValidationError("data: give either a target directory or a style, not both");
            return taskdata::make_style_pairs(taskdata::load_clean_images(data.path, opts), taskdata::parse_style_id(data.style));
        }
        if (data.target.empty()) throw ValidationError("data: stylization needs a target directory or a style");
        return taskdata::load_style_pairs(data.path, data.target, opts);
    case TaskKind::shadow_removal: return taskdata::load_shadow_pairs(data.path, opts);
    case TaskKind::reconstruction: return taskdata::load_clean_images(data.path, opts);
    }
    throw ValidationError("unsupported task");
}

model::TaskSpec default_task(const std::string& name, std::int64_t channels) {
    const auto kind = model::parse_task_kind(name);
    if (channels <= 0) {
        channels = kind == TaskKind::landmarks      ? taskdata::kFaceLandmarks
                   : kind == TaskKind::segmentation ? taskdata::kFaceClasses
                                                    : 3;
    }
    auto task = model::TaskSpec::make(kind, channels);
    task.validate();
    return task;
}

} // namespace fsma::cli
