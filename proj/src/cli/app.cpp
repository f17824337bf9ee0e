#include "fsma/cli/app.hpp"

#include "fsma/cli/data_spec.hpp"
#include "fsma/common/errors.hpp"
#include "fsma/common/log.hpp"
#include "fsma/evalmetrics/ablation.hpp"
#include "fsma/evalmetrics/evaluate.hpp"
#include "fsma/evalmetrics/visualize.hpp"
#include "fsma/model/checkpoint.hpp"
#include "fsma/objectives/losses.hpp"
#include "fsma/taskdata/faces.hpp"
#include "fsma/taskdata/image_io.hpp"
#include "fsma/taskdata/loaders.hpp"
#include "fsma/taskdata/shadows.hpp"
#include "fsma/trainer/adapt.hpp"
#include "fsma/trainer/pretrain.hpp"
#include "fsma/trainer/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

namespace fsma::cli {

namespace fs = std::filesystem;
using model::TaskKind;

namespace {

/// <out>/{checkpoints,logs,reports,images}
struct Layout {
    fs::path root;

    fs::path checkpoints() const { return root / "checkpoints"; }
    fs::path logs() const { return root / "logs"; }
    fs::path reports() const { return root / "reports"; }
    fs::path images() const { return root / "images"; }

    void create() const {
        for (const auto& d : {checkpoints(), logs(), reports(), images()}) fs::create_directories(d);
    }
};

void write_text_atomic(const fs::path& path, const std::string& text) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw RuntimeError("cannot write '" + path.string() + "'");
    }
    fs::rename(tmp, path);
}

/// Writes the resolved configuration; feeding it back through --config reruns the command.
void write_snapshot(const Layout& layout, const std::string& command, const nlohmann::json& body) {
    auto j = body;
    j["command"] = command;
    write_text_atomic(layout.reports() / (command + "_config.json"), j.dump(2) + "\n");
}

nlohmann::json load_config(const std::string& path, const std::string& command) {
    if (path.empty()) return nlohmann::json::object();
    if (!fs::exists(path)) throw ValidationError("config file '" + path + "' does not exist");
    auto j = read_json_file(path);
    if (!j.is_object()) throw ValidationError("config file '" + path + "' must hold an object");
    if (j.contains("command")) {
        if (!j.at("command").is_string() || j.at("command").get<std::string>() != command) {
            throw ValidationError("config file '" + path + "' is for command '" + j.at("command").dump() + "', not '" +
                                  command + "'");
        }
        j.erase("command");
    }
    return j;
}

/// Options shared by every training or evaluation command.
struct Common {
    std::string config;
    std::string out;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<bool> deterministic;
};

void add_common(CLI::App* sub, Common& c, bool with_preset) {
    sub->add_option("--config", c.config, "JSON config file");
    sub->add_option("--out", c.out, "output directory");
    if (with_preset) sub->add_option("--preset", c.preset, "toy or full")->check(CLI::IsMember({"toy", "full"}));
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_flag("--deterministic,!--no-deterministic", c.deterministic, "single-threaded, byte-identical logs");
}

std::string resolve_out(JsonReader& r, const Common& c) {
    std::string out;
    r.read("out", out);
    if (!c.out.empty()) out = c.out;
    if (out.empty()) throw ValidationError("--out is required");
    return out;
}

std::string resolve_preset(JsonReader& r, const Common& c) {
    std::string preset = "toy";
    r.read("preset", preset);
    if (!c.preset.empty()) preset = c.preset;
    if (preset != "toy" && preset != "full") throw ValidationError("preset must be toy or full");
    return preset;
}

DataSpec resolve_data(JsonReader& r, const std::string& key, const std::string& flag_path, const std::string& flag_target,
                      const std::string& flag_style) {
    DataSpec data;
    if (r.has(key)) data = data_spec_from_json(r.raw(key), key);
    if (!flag_path.empty()) data.path = flag_path;
    if (!flag_target.empty()) data.target = flag_target;
    if (!flag_style.empty()) data.style = flag_style;
    return data;
}

std::string require_path(JsonReader& r, const std::string& key, const std::string& flag, const std::string& what) {
    std::string value;
    r.read(key, value);
    if (!flag.empty()) value = flag;
    if (value.empty()) throw ValidationError("--" + key + " (" + what + ") is required");
    return value;
}

model::Checkpoint load_existing_checkpoint(const std::string& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("checkpoint '" + path + "' does not exist");
    return model::load_checkpoint(path);
}

// ---------------------------------------------------------------- pretrain

struct PretrainArgs {
    Common common;
    std::string data;
    std::int64_t max_steps = 0;
};

void cmd_pretrain(const PretrainArgs& a) {
    const auto file = load_config(a.common.config, "pretrain");
    JsonReader r(file, "");
    const auto preset = resolve_preset(r, a.common);
    auto cfg = preset == "full" ? trainer::PretrainConfig::full_scale() : trainer::PretrainConfig::toy();
    if (r.has("pretrain")) trainer::merge(r.child("pretrain"), cfg);
    const auto data = resolve_data(r, "data", a.data, "", "");
    const Layout layout{resolve_out(r, a.common)};
    r.finish();
    if (a.common.seed) cfg.seed = *a.common.seed;
    if (a.common.deterministic) cfg.deterministic = *a.common.deterministic;
    if (a.max_steps > 0) {
        for (auto& ph : cfg.phases) ph.max_steps = a.max_steps;
    }
    cfg.validate();
    const auto samples = load_task_data(model::TaskSpec{}, data, 0, 255);

    layout.create();
    write_snapshot(layout, "pretrain", {{"data", to_json(data)}, {"out", layout.root.string()}, {"pretrain", trainer::to_json(cfg)}});
    const auto ckpt = layout.checkpoints() / "pretrain.ckpt";
    const auto result = trainer::run_pretrain(cfg, samples, {ckpt, layout.logs() / "pretrain.log"});
    std::cout << "pretrained " << result.history.size() << " steps on " << samples.size() << " images -> "
              << ckpt.string() << "\n";
}

// ---------------------------------------------------------------- adapt

struct AdaptArgs {
    Common common;
    std::string from;
    std::string data;
    std::string target;
    std::string style;
    std::string task;
    std::int64_t channels = 0;
    std::string mask;
    std::int64_t max_steps = 0;
};

/// Task from the flag, else from the config section's "task" key.
std::optional<model::TaskSpec> resolve_task(const std::string& flag, std::int64_t channels, const nlohmann::json& section) {
    if (!flag.empty()) return default_task(flag, channels);
    if (section.is_object() && section.contains("task")) return model::task_from_json(section.at("task"));
    return std::nullopt;
}

void cmd_adapt(const AdaptArgs& a) {
    const auto file = load_config(a.common.config, "adapt");
    JsonReader r(file, "");
    auto section = r.has("adapt") ? r.raw("adapt") : nlohmann::json::object();
    const auto task = resolve_task(a.task, a.channels, section);
    if (!task) throw ValidationError("--task is required");
    const auto preset = resolve_preset(r, a.common);
    const auto from = require_path(r, "from", a.from, "pretrained checkpoint");
    const auto data = resolve_data(r, "data", a.data, a.target, a.style);
    const Layout layout{resolve_out(r, a.common)};
    r.finish();

    const auto pretrained = load_existing_checkpoint(from);
    const auto& backbone = pretrained.manifest.backbone;
    if (!section.is_object()) throw ValidationError("adapt: expected an object");
    section.erase("task");
    std::int64_t ignore_index = objectives::kDefaultIgnoreIndex;
    if (section.contains("ignore_index") && section.at("ignore_index").is_number_integer()) {
        ignore_index = section.at("ignore_index").get<std::int64_t>();
    }
    const auto samples = load_task_data(*task, data, backbone.input_size, ignore_index);
    auto cfg = preset == "full" ? trainer::AdaptConfig::full_scale(*task, samples.size()) : trainer::AdaptConfig::toy(*task);
    cfg.mask = std::string(static_cast<std::size_t>(task->decoder_levels(backbone.num_scales)), '0');
    trainer::merge(JsonReader(section, "adapt"), cfg);
    if (!a.mask.empty()) cfg.mask = a.mask;
    if (a.common.seed) cfg.seed = *a.common.seed;
    if (a.common.deterministic) cfg.deterministic = *a.common.deterministic;
    if (a.max_steps > 0) {
        cfg.max_steps = a.max_steps;
        cfg.epochs = 0;
    }
    cfg.validate();
    model::SkipMask::parse(cfg.mask, static_cast<std::size_t>(task->decoder_levels(backbone.num_scales)));
    trainer::check_samples(cfg.task, samples, backbone.input_size);

    layout.create();
    write_snapshot(layout, "adapt",
                   {{"from", from}, {"data", to_json(data)}, {"out", layout.root.string()}, {"adapt", trainer::to_json(cfg)}});
    const auto ckpt = layout.checkpoints() / "adapt.ckpt";
    const auto result = trainer::run_adapt(cfg, pretrained, samples, {ckpt, {}, layout.logs() / "adapt.log"});

    const auto frozen = trainer::verify_frozen(pretrained, result.checkpoint);
    std::string text = "backbone_max_abs_delta: " + std::to_string(frozen.backbone_max) + "\n";
    for (const auto& g : frozen.groups) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-24s %s %.9g\n", g.group.c_str(), g.backbone ? "backbone " : "trainable", g.max_abs);
        text += buf;
    }
    for (const auto& g : frozen.added) text += g + " added\n";
    write_text_atomic(layout.reports() / "adapt_frozen.txt", text);
    write_text_atomic(layout.reports() / "adapt_manifest.json", model::to_json(result.checkpoint.manifest).dump(2) + "\n");
    if (!frozen.pass) throw RuntimeError("adapt: backbone parameters changed during adaptation");
    std::cout << "adapted task=" << model::to_string(cfg.task.kind) << " mask=" << cfg.mask << " steps="
              << result.history.size() << " -> " << ckpt.string() << "\n";
}

// ---------------------------------------------------------------- infer

struct InferArgs {
    std::string from;
    std::string input;
    std::string out;
};

std::vector<fs::path> list_inputs(const fs::path& input) {
    if (fs::is_directory(input)) return taskdata::list_images(input);
    if (taskdata::is_image_file(input)) return {input};
    std::vector<fs::path> files;
    for (const auto& rec : taskdata::read_manifest(input, false)) files.push_back(rec.image);
    return files;
}

void cmd_infer(const InferArgs& a) {
    if (a.from.empty()) throw ValidationError("--from is required");
    if (a.input.empty()) throw ValidationError("--input is required");
    if (a.out.empty()) throw ValidationError("--out is required");
    if (!fs::exists(a.input)) throw ValidationError("input '" + a.input + "' does not exist");
    const auto model = model::restore_bundle(load_existing_checkpoint(a.from));
    const auto files = list_inputs(a.input);
    if (files.empty()) throw ValidationError("no input images in '" + a.input + "'");
    std::set<std::string> stems;
    for (const auto& f : files) {
        if (!stems.insert(f.stem().string()).second) throw ValidationError("duplicate input name '" + f.stem().string() + "'");
    }

    const Layout layout{a.out};
    layout.create();
    const auto pred_dir = layout.root / "predictions";
    fs::create_directories(pred_dir);
    const auto task = model.effective_task();
    const auto size = model.config().input_size;
    torch::NoGradGuard no_grad;
    std::string index = "# input\tprediction\toverlay\n";
    for (const auto& f : files) {
        const auto original = taskdata::read_image(f);
        const auto h = original.size(1);
        const auto w = original.size(2);
        const auto x = taskdata::resize_image(original, size, size).unsqueeze(0);
        const auto out = model::forward_task(model, x)[0];
        const auto stem = f.stem().string();
        fs::path prediction;
        fs::path overlay;
        switch (task.kind) {
        case TaskKind::landmarks: {
            auto points = taskdata::decode_landmarks(out, size, size);
            const double sx = static_cast<double>(w) / static_cast<double>(size);
            const double sy = static_cast<double>(h) / static_cast<double>(size);
            for (auto& p : points) p = {(p.x + 0.5) * sx - 0.5, (p.y + 0.5) * sy - 0.5};
            prediction = pred_dir / (stem + ".txt");
            taskdata::write_points(prediction, points);
            overlay = layout.images() / (stem + "_overlay.png");
            taskdata::write_image(overlay, evalmetrics::draw_points(original, points));
            break;
        }
        case TaskKind::segmentation: {
            const auto labels = taskdata::resize_mask(out.argmax(0), h, w);
            prediction = pred_dir / (stem + ".png");
            taskdata::write_mask(prediction, labels);
            overlay = layout.images() / (stem + "_overlay.png");
            taskdata::write_image(overlay, evalmetrics::overlay_labels(original, labels, task.out_channels));
            break;
        }
        default: {
            prediction = pred_dir / (stem + ".png");
            taskdata::write_image(prediction, taskdata::resize_image(out.clamp(0.0, 1.0), h, w));
            break;
        }
        }
        index += f.string() + "\t" + fs::relative(prediction, layout.root).string() + "\t" +
                 (overlay.empty() ? std::string("-") : fs::relative(overlay, layout.root).string()) + "\n";
    }
    write_text_atomic(layout.reports() / "infer_index.tsv", index);
    std::cout << "wrote " << files.size() << " prediction(s) to " << pred_dir.string() << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    std::string from;
    std::string predictions;
    std::string data;
    std::string target;
    std::string style;
    std::string metric;
    std::string task;
    std::int64_t channels = 0;
};

std::string metric_for(TaskKind kind) {
    switch (kind) {
    case TaskKind::landmarks: return "nme";
    case TaskKind::segmentation: return "f1";
    default: return "image";
    }
}

evalmetrics::Predictions read_predictions(TaskKind kind, const fs::path& dir, const taskdata::SampleSet& samples) {
    if (!fs::is_directory(dir)) throw ValidationError("predictions directory '" + dir.string() + "' does not exist");
    evalmetrics::Predictions p;
    for (const auto& s : samples) {
        const auto file = dir / (s.id + (kind == TaskKind::landmarks ? ".txt" : ".png"));
        if (!fs::exists(file)) throw ValidationError("missing prediction '" + file.string() + "'");
        switch (kind) {
        case TaskKind::landmarks: p.points.push_back(taskdata::read_points(file)); break;
        case TaskKind::segmentation: p.masks.push_back(taskdata::read_mask(file)); break;
        default: p.images.push_back(taskdata::read_image(file)); break;
        }
    }
    return p;
}

void cmd_eval(const EvalArgs& a) {
    const auto file = load_config(a.common.config, "eval");
    JsonReader r(file, "");
    evalmetrics::EvalSpec spec;
    const bool custom_f1 = r.has("eval") && r.raw("eval").contains("f1");
    if (r.has("eval")) evalmetrics::merge(r.child("eval"), spec);
    std::string from;
    r.read("from", from);
    if (!a.from.empty()) from = a.from;
    std::string predictions;
    r.read("predictions", predictions);
    if (!a.predictions.empty()) predictions = a.predictions;
    const auto data = resolve_data(r, "data", a.data, a.target, a.style);
    const Layout layout{resolve_out(r, a.common)};
    r.finish();
    if (from.empty() == predictions.empty()) throw ValidationError("eval: give exactly one of --from or --predictions");
    if (!a.metric.empty() && a.metric != "nme" && a.metric != "f1" && a.metric != "image") {
        throw ValidationError("--metric must be nme, f1 or image");
    }

    std::optional<model::ModelBundle> model;
    model::TaskSpec task;
    if (!from.empty()) {
        model = model::restore_bundle(load_existing_checkpoint(from));
        task = model->effective_task();
        if (!a.task.empty() && model::parse_task_kind(a.task) != task.kind) {
            throw ValidationError("eval: --task " + a.task + " does not match the checkpoint's task " + model::to_string(task.kind));
        }
    } else if (!a.task.empty()) {
        task = default_task(a.task, a.channels);
    } else if (a.metric == "nme") {
        task = default_task("landmarks", a.channels > 0 ? a.channels : spec.nme.num_points);
    } else if (a.metric == "f1") {
        task = default_task("segmentation", a.channels > 0 ? a.channels : spec.f1.num_classes);
    } else {
        throw ValidationError("eval: --predictions needs --task or --metric nme|f1");
    }
    if (!a.metric.empty() && a.metric != metric_for(task.kind)) {
        throw ValidationError("eval: metric " + a.metric + " does not apply to a " + model::to_string(task.kind) + " model");
    }
    if (task.kind == TaskKind::landmarks && task.out_channels != spec.nme.num_points) {
        throw ValidationError("eval: NME spec covers " + std::to_string(spec.nme.num_points) + " points, task has " +
                              std::to_string(task.out_channels));
    }
    if (task.kind == TaskKind::segmentation && task.out_channels != spec.f1.num_classes) {
        if (custom_f1) throw ValidationError("eval: F1 spec class count does not match the task");
        std::vector<std::string> names;
        std::vector<std::string> components;
        for (std::int64_t c = 0; c < task.out_channels; ++c) {
            names.push_back("class" + std::to_string(c));
            if (c > 0) components.push_back(names.back());
        }
        spec.f1 = evalmetrics::F1Spec::per_class(names, components);
    }

    const auto samples = load_task_data(task, data, model ? model->config().input_size : 0, 255);
    const auto preds = model ? evalmetrics::predict(*model, samples, spec.batch_size)
                             : read_predictions(task.kind, predictions, samples);
    const auto report = evalmetrics::score(task.kind, preds, samples, spec);

    layout.create();
    write_snapshot(layout, "eval",
                   {{"from", from}, {"predictions", predictions}, {"data", to_json(data)}, {"out", layout.root.string()},
                    {"eval", evalmetrics::to_json(spec)}});
    write_text_atomic(layout.reports() / "eval.json", evalmetrics::to_json(report).dump(2) + "\n");
    const auto text = evalmetrics::to_text(report);
    write_text_atomic(layout.reports() / "eval.txt", text);
    std::cout << text;
}

// ---------------------------------------------------------------- synth-shadow

struct ShadowArgs {
    Common common;
    std::string clean;
    std::int64_t count = 0;
};

void cmd_synth_shadow(const ShadowArgs& a) {
    const auto file = load_config(a.common.config, "synth-shadow");
    JsonReader r(file, "");
    taskdata::ShadowSynthConfig cfg;
    if (r.has("shadow")) taskdata::merge(r.child("shadow"), cfg);
    std::string clean;
    r.read("clean", clean);
    if (!a.clean.empty()) clean = a.clean;
    std::int64_t count = 0;
    r.read("count", count);
    if (a.count > 0) count = a.count;
    const Layout layout{resolve_out(r, a.common)};
    r.finish();
    if (a.common.seed) cfg.seed = *a.common.seed;
    cfg.validate();
    if (clean.empty()) throw ValidationError("--clean is required");
    if (count <= 0) throw ValidationError("--count must be positive");
    if (!fs::exists(clean)) throw ValidationError("clean image source '" + clean + "' does not exist");
    const auto clean_set = taskdata::load_clean_images(clean);
    const auto dataset = taskdata::make_shadow_dataset(clean_set, cfg, count);

    layout.create();
    const auto dir = layout.images() / "shadows";
    fs::create_directories(dir);
    std::vector<taskdata::ShadowManifestRow> rows;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const auto& s = dataset.samples[i];
        const auto& ann = std::get<taskdata::ShadowAnnotation>(s.annotation);
        char name[32];
        std::snprintf(name, sizeof name, "%05zu", i);
        taskdata::ShadowManifestRow row{dataset.records[i], std::string("images/shadows/shadowed_") + name + ".png",
                                        std::string("images/shadows/clean_") + name + ".png",
                                        std::string("images/shadows/mask_") + name + ".png"};
        taskdata::write_image(layout.root / row.shadowed_path, s.image);
        taskdata::write_image(layout.root / row.clean_path, ann.clean);
        taskdata::write_mask(layout.root / row.mask_path, ann.mask.to(torch::kInt64) * 255);
        rows.push_back(std::move(row));
    }
    const auto manifest = layout.root / "shadow_manifest.tsv";
    taskdata::write_shadow_manifest(manifest, rows);
    write_snapshot(layout, "synth-shadow",
                   {{"clean", clean}, {"count", count}, {"out", layout.root.string()}, {"shadow", taskdata::to_json(cfg)}});
    std::cout << "wrote " << rows.size() << " shadow pair(s) from " << clean_set.size() << " clean image(s) -> "
              << manifest.string() << "\n";
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
    Common common;
    std::string from;
    std::string data;
    std::string test;
    std::string target;
    std::string style;
    std::string task;
    std::int64_t channels = 0;
    std::vector<std::string> masks;
    std::vector<std::uint64_t> seeds;
    std::int64_t max_steps = 0;
    bool resume = false;
};

void cmd_ablate(const AblateArgs& a) {
    const auto file = load_config(a.common.config, "ablate");
    JsonReader r(file, "");
    auto section = r.has("ablation") ? r.raw("ablation") : nlohmann::json::object();
    if (!section.is_object()) throw ValidationError("ablation: expected an object");
    auto adapt_section = section.contains("adapt") ? section.at("adapt") : nlohmann::json::object();
    auto task = resolve_task(a.task, a.channels, adapt_section);
    if (!task) task = default_task("segmentation");
    const auto preset = resolve_preset(r, a.common);
    const auto from = require_path(r, "from", a.from, "pretrained checkpoint");
    const auto train_data = resolve_data(r, "data", a.data, a.target, a.style);
    const auto test_data = resolve_data(r, "test", a.test, a.target, a.style);
    const Layout layout{resolve_out(r, a.common)};
    r.finish();

    const auto pretrained = load_existing_checkpoint(from);
    const auto& backbone = pretrained.manifest.backbone;
    const auto train = load_task_data(*task, train_data, backbone.input_size, 255);
    const auto test = load_task_data(*task, test_data, backbone.input_size, 255);

    evalmetrics::AblationConfig cfg;
    cfg.adapt = preset == "full" ? trainer::AdaptConfig::full_scale(*task, train.size()) : trainer::AdaptConfig::toy(*task);
    const auto levels = static_cast<std::size_t>(task->decoder_levels(backbone.num_scales));
    cfg.adapt.mask = std::string(levels, '0');
    cfg.masks = {std::string(levels, '0'), std::string(levels, '1')};
    adapt_section.erase("task");
    section["adapt"] = adapt_section;
    evalmetrics::merge(JsonReader(section, "ablation"), cfg);
    if (!a.masks.empty()) cfg.masks = a.masks;
    if (!a.seeds.empty()) cfg.seeds = a.seeds;
    if (a.common.deterministic) cfg.adapt.deterministic = *a.common.deterministic;
    if (a.max_steps > 0) {
        cfg.adapt.max_steps = a.max_steps;
        cfg.adapt.epochs = 0;
    }
    if (a.resume) cfg.resume = true;
    cfg.validate(backbone);

    layout.create();
    auto snapshot_cfg = evalmetrics::to_json(cfg);
    snapshot_cfg.erase("resume");
    write_snapshot(layout, "ablate",
                   {{"from", from},
                    {"data", to_json(train_data)},
                    {"test", to_json(test_data)},
                    {"out", layout.root.string()},
                    {"ablation", snapshot_cfg}});
    const auto result = evalmetrics::run_ablation(cfg, pretrained, train, test, layout.root);
    std::cout << evalmetrics::render_table(result.rows, evalmetrics::reference_values(cfg.adapt.task, cfg.eval));
}

// ---------------------------------------------------------------- gen-faces

struct FacesArgs {
    std::int64_t count = 0;
    std::int64_t size = 64;
    std::uint64_t seed = 0;
    std::string prefix = "face";
    std::string out;
};

void cmd_gen_faces(const FacesArgs& a) {
    if (a.count <= 0) throw ValidationError("--count must be positive");
    if (a.size < 16) throw ValidationError("--size must be >= 16");
    if (a.out.empty()) throw ValidationError("--out is required");
    const auto faces = taskdata::generate_faces(a.count, a.size, a.seed);
    taskdata::write_face_dataset(a.out, faces, a.prefix);
    std::cout << "wrote " << faces.size() << " synthetic face(s) to " << a.out << "\n";
}

std::vector<char*> make_argv(std::vector<std::string>& storage) {
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return argv;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Few-shot model adaptation: pretraining, adaptation, inference, evaluation and ablations", "fsma"};
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    PretrainArgs pre;
    auto* s_pre = app.add_subcommand("pretrain", "train the adversarial auto-encoder on unlabeled images");
    add_common(s_pre, pre.common, true);
    s_pre->add_option("--data", pre.data, "image directory or manifest");
    s_pre->add_option("--max-steps", pre.max_steps, "cap steps per phase");

    AdaptArgs ad;
    auto* s_ad = app.add_subcommand("adapt", "attach and train a task head on a frozen pretrained backbone");
    add_common(s_ad, ad.common, true);
    s_ad->add_option("--from", ad.from, "pretrained checkpoint");
    s_ad->add_option("--data", ad.data, "training manifest or directory");
    s_ad->add_option("--target", ad.target, "stylization target directory");
    s_ad->add_option("--style", ad.style, "built-in stylization target (posterize, warm)");
    s_ad->add_option("--task", ad.task, "landmarks, segmentation, stylization, shadow_removal");
    s_ad->add_option("--channels", ad.channels, "landmark count or class count");
    s_ad->add_option("--mask", ad.mask, "skip-layer digits, coarsest scale first");
    s_ad->add_option("--max-steps", ad.max_steps, "step budget (overrides epochs)");

    InferArgs inf;
    auto* s_inf = app.add_subcommand("infer", "run an adapted model over images");
    s_inf->add_option("--from", inf.from, "checkpoint");
    s_inf->add_option("--input", inf.input, "image, directory or manifest");
    s_inf->add_option("--out", inf.out, "output directory");

    EvalArgs ev;
    auto* s_ev = app.add_subcommand("eval", "score a checkpoint or saved predictions against annotations");
    add_common(s_ev, ev.common, false);
    s_ev->add_option("--from", ev.from, "checkpoint");
    s_ev->add_option("--predictions", ev.predictions, "directory of <id>.txt points or <id>.png masks/images");
    s_ev->add_option("--data", ev.data, "annotated manifest");
    s_ev->add_option("--target", ev.target, "stylization target directory");
    s_ev->add_option("--style", ev.style, "built-in stylization target");
    s_ev->add_option("--metric", ev.metric, "nme, f1 or image");
    s_ev->add_option("--task", ev.task, "task of the predictions");
    s_ev->add_option("--channels", ev.channels, "landmark count or class count");

    ShadowArgs sh;
    auto* s_sh = app.add_subcommand("synth-shadow", "synthesize shadowed/clean training pairs");
    add_common(s_sh, sh.common, false);
    s_sh->add_option("--clean", sh.clean, "clean image directory or manifest");
    s_sh->add_option("--count", sh.count, "number of pairs");

    AblateArgs ab;
    auto* s_ab = app.add_subcommand("ablate", "sweep skip-layer masks over paired seeds");
    add_common(s_ab, ab.common, true);
    s_ab->remove_option(s_ab->get_option("--seed"));
    s_ab->add_option("--from", ab.from, "pretrained checkpoint");
    s_ab->add_option("--data", ab.data, "training manifest");
    s_ab->add_option("--test", ab.test, "held-out manifest");
    s_ab->add_option("--target", ab.target, "stylization target directory");
    s_ab->add_option("--style", ab.style, "built-in stylization target");
    s_ab->add_option("--task", ab.task, "task kind (default segmentation)");
    s_ab->add_option("--channels", ab.channels, "landmark count or class count");
    s_ab->add_option("--mask", ab.masks, "mask to include (repeatable)");
    s_ab->add_option("--seed", ab.seeds, "seed to include (repeatable)");
    s_ab->add_option("--max-steps", ab.max_steps, "step budget per cell (overrides epochs)");
    s_ab->add_flag("--resume", ab.resume, "skip (mask, seed) cells already in the results file");

    FacesArgs fa;
    auto* s_fa = app.add_subcommand("gen-faces", "render a synthetic annotated face dataset");
    s_fa->add_option("--count", fa.count, "number of faces");
    s_fa->add_option("--size", fa.size, "image side in pixels");
    s_fa->add_option("--seed", fa.seed, "seed");
    s_fa->add_option("--prefix", fa.prefix, "sample id prefix");
    s_fa->add_option("--out", fa.out, "dataset directory");

    std::vector<std::string> storage{"fsma"};
    storage.insert(storage.end(), args.begin(), args.end());
    auto argv = make_argv(storage);
    try {
        app.parse(static_cast<int>(storage.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }
    if (verbose) log::set_level(log::Level::debug);
    if (quiet) log::set_level(log::Level::warn);

    try {
        if (*s_pre) cmd_pretrain(pre);
        else if (*s_ad) cmd_adapt(ad);
        else if (*s_inf) cmd_infer(inf);
        else if (*s_ev) cmd_eval(ev);
        else if (*s_sh) cmd_synth_shadow(sh);
        else if (*s_ab) cmd_ablate(ab);
        else if (*s_fa) cmd_gen_faces(fa);
        return kExitOk;
    } catch (const ValidationError& e) {
        log::error(e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        log::error(e.what());
        return kExitRuntime;
    }
}

} // namespace fsma::cli
