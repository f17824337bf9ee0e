#include "fsma/evalmetrics/ablation.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/log.hpp"
#include "fsma/evalmetrics/visualize.hpp"
#include "fsma/taskdata/image_io.hpp"
#include "fsma/trainer/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fsma::evalmetrics {

namespace fs = std::filesystem;
using model::SkipMask;
using model::TaskKind;

void AblationConfig::validate(const model::BackboneConfig& backbone) const {
    if (masks.size() < 2) throw ValidationError("ablation: at least two masks are required");
    const auto levels = static_cast<std::size_t>(adapt.task.decoder_levels(backbone.num_scales));
    std::set<std::string> seen;
    for (const auto& m : masks) {
        const auto parsed = SkipMask::parse(m, levels);
        if (!seen.insert(parsed.to_string()).second) throw ValidationError("ablation: duplicate mask '" + m + "'");
    }
    if (seeds.empty()) throw ValidationError("ablation: at least one seed is required");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ValidationError("ablation: duplicate seed");
    }
    if (previews < 0) throw ValidationError("ablation: previews must be >= 0");
    auto probe = adapt;
    probe.mask = masks.front();
    probe.validate();
    eval.nme.validate();
    eval.f1.validate();
}

nlohmann::json to_json(const AblationConfig& cfg) {
    return {{"masks", cfg.masks},       {"seeds", cfg.seeds},       {"adapt", trainer::to_json(cfg.adapt)},
            {"eval", to_json(cfg.eval)}, {"previews", cfg.previews}, {"resume", cfg.resume}};
}

void merge(JsonReader reader, AblationConfig& cfg) {
    // "adapt" first: its "task" key resets the template before anything else refers to it
    if (reader.has("adapt")) trainer::merge(reader.child("adapt"), cfg.adapt);
    reader.read("masks", cfg.masks);
    reader.read("seeds", cfg.seeds);
    if (reader.has("eval")) merge(reader.child("eval"), cfg.eval);
    reader.read("previews", cfg.previews);
    reader.read("resume", cfg.resume);
    reader.finish();
}

nlohmann::json to_json(const AblationRow& row) {
    return {{"mask", row.mask.to_string()}, {"seed", row.seed}, {"train_size", row.train_size},
            {"metrics", to_json(row.metrics)}};
}

AblationRow ablation_row_from_json(const nlohmann::json& j) {
    try {
        AblationRow row;
        const auto mask = j.at("mask").get<std::string>();
        row.mask = SkipMask::parse(mask, mask.size());
        row.seed = j.at("seed").get<std::uint64_t>();
        row.train_size = j.at("train_size").get<std::int64_t>();
        row.metrics = metric_report_from_json(j.at("metrics"));
        return row;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("ablation row: ") + e.what());
    }
}

void sort_rows(std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seed_order) {
    auto seed_rank = [&](std::uint64_t s) {
        const auto it = std::find(seed_order.begin(), seed_order.end(), s);
        return static_cast<std::size_t>(it - seed_order.begin());
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const AblationRow& a, const AblationRow& b) {
        if (a.mask != b.mask) return model::ablation_order(a.mask, b.mask);
        return seed_rank(a.seed) < seed_rank(b.seed);
    });
}

std::vector<ReferenceValue> reference_values(const model::TaskSpec& task, const EvalSpec& spec) {
    if (task.kind == TaskKind::segmentation && task.out_channels == 11) {
        const auto helen = F1Spec::helen11();
        if (to_json(spec.f1) == to_json(helen)) {
            const std::string note = "full-scale Helen face parsing";
            return {{"00000", "overall_f1", 85.23, note}, {"11111", "overall_f1", 90.32, note}};
        }
    }
    if (task.kind == TaskKind::landmarks && task.out_channels == 68) {
        if (to_json(spec.nme) == to_json(NmeSpec::ibug68())) {
            const std::string note = "full-scale 300-W landmarks, full training set";
            return {{"0000", "nme_all", 4.31, note}, {"1111", "nme_all", 3.88, note}};
        }
    }
    return {};
}

namespace {

std::string fmt2(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string signed2(double v) {
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f", v);
    return buf;
}

bool higher_is_better(const MetricReport& r) { return r.f1.has_value(); }

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> cells;

    std::string render() const {
        std::vector<std::size_t> width(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
        for (const auto& row : cells) {
            for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        }
        auto line = [&](const std::vector<std::string>& row) {
            std::string out;
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (c) out += (c == 3 ? " | " : "  ");
                const auto pad = std::string(width[c] - row[c].size(), ' ');
                out += c == 0 ? row[c] + pad : pad + row[c];
            }
            while (!out.empty() && out.back() == ' ') out.pop_back();
            return out + "\n";
        };
        std::string out = line(header);
        std::size_t total = 0;
        for (const auto w : width) total += w;
        total += 2 * (width.size() - 1) + (width.size() > 3 ? 1 : 0);
        out += std::string(total, '-') + "\n";
        for (const auto& row : cells) out += line(row);
        return out;
    }
};

Table build_table(const std::vector<AblationRow>& rows) {
    Table t;
    t.header = {"skip layers", "seed", "train"};
    const auto& first = rows.front().metrics;
    std::vector<std::string> columns;
    if (first.nme) {
        columns = {"inside", "outline", "all"};
    } else if (first.f1) {
        // every reported group except the background one, then the macro mean
        for (const auto& name : first.f1->names) {
            if (name != "background") columns.push_back(name);
        }
        columns.push_back("overall");
    } else {
        columns = {"l1", "ssim"};
    }
    t.header.insert(t.header.end(), columns.begin(), columns.end());
    for (const auto& row : rows) {
        std::vector<std::string> cells{row.mask.to_string(), std::to_string(row.seed), std::to_string(row.train_size)};
        const auto& m = row.metrics;
        if (m.nme) {
            cells.insert(cells.end(), {fmt2(m.nme->inside), fmt2(m.nme->outline), fmt2(m.nme->all)});
        } else if (m.f1) {
            for (std::size_t c = 0; c + 1 < columns.size(); ++c) {
                const auto v = m.f1->get(columns[c]);
                cells.push_back(v ? fmt2(*v) : "undef");
            }
            cells.push_back(fmt2(m.f1->overall));
        } else if (m.image) {
            char l1[32];
            char ss[32];
            std::snprintf(l1, sizeof l1, "%.4f", m.image->l1);
            std::snprintf(ss, sizeof ss, "%.4f", m.image->ssim);
            cells.insert(cells.end(), {l1, ss});
        }
        cells.resize(t.header.size(), "n/a");
        t.cells.push_back(std::move(cells));
    }
    return t;
}

} // namespace

std::string render_table(const std::vector<AblationRow>& rows, const std::vector<ReferenceValue>& references) {
    if (rows.empty()) throw ValidationError("render_report: no rows");
    std::string out = "task: " + model::to_string(rows.front().metrics.task) + "\n";
    out += "metric: " + rows.front().metrics.primary_name() +
           (higher_is_better(rows.front().metrics) ? " (higher is better)\n\n" : " (lower is better)\n\n");
    out += build_table(rows).render();

    // per-mask means and paired differences against the first mask
    std::vector<std::string> order;
    std::map<std::string, std::map<std::uint64_t, double>> by_mask;
    std::vector<std::uint64_t> seeds;
    for (const auto& r : rows) {
        const auto m = r.mask.to_string();
        if (!by_mask.count(m)) order.push_back(m);
        by_mask[m][r.seed] = r.metrics.primary();
        if (std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
    }
    out += "\nmean over seeds:\n";
    for (const auto& m : order) {
        double sum = 0.0;
        for (const auto& [seed, v] : by_mask[m]) sum += v;
        out += "  " + m + "  " + fmt2(sum / static_cast<double>(by_mask[m].size())) + "  (" +
               std::to_string(by_mask[m].size()) + " seeds)\n";
    }
    if (order.size() > 1) {
        const bool higher = higher_is_better(rows.front().metrics);
        const auto& base = by_mask[order.front()];
        out += "\npaired difference vs " + order.front() + ":\n";
        for (std::size_t i = 1; i < order.size(); ++i) {
            std::string deltas;
            int better = 0;
            int paired = 0;
            for (const auto s : seeds) {
                const auto a = by_mask[order[i]].find(s);
                const auto b = base.find(s);
                if (a == by_mask[order[i]].end() || b == base.end()) continue;
                const double d = a->second - b->second;
                deltas += " seed " + std::to_string(s) + " " + signed2(d) + ";";
                ++paired;
                if (higher ? d > 0 : d < 0) ++better;
            }
            if (!deltas.empty()) deltas.pop_back();
            out += "  " + order[i] + ":" + deltas + "  (better in " + std::to_string(better) + "/" +
                   std::to_string(paired) + ")\n";
        }
    }
    if (!references.empty()) {
        out += "\nreference (" + references.front().note + "):\n";
        for (const auto& ref : references) out += "  " + ref.mask + "  " + ref.metric + " " + fmt2(ref.value) + "\n";
    }
    return out;
}

ReportFiles render_report(const std::vector<AblationRow>& rows, const std::vector<PreviewGrid>& grids,
                          const std::vector<ReferenceValue>& references, const fs::path& out_dir) {
    const auto text = render_table(rows, references);
    ReportFiles files;
    std::error_code ec;
    fs::create_directories(out_dir / "reports", ec);
    fs::create_directories(out_dir / "images", ec);
    files.table = out_dir / "reports" / "ablation.txt";
    {
        std::ofstream out(files.table, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot write '" + files.table.string() + "'");
        out << text;
        if (!out) throw RuntimeError("cannot write '" + files.table.string() + "'");
    }
    for (const auto& g : grids) {
        if (g.rows.empty()) continue;
        const auto path = out_dir / "images" / (g.name + ".png");
        taskdata::write_image(path, tile_grid(g.rows));
        files.grids.push_back(path);
    }
    return files;
}

fs::path AblationLayout::checkpoint(const std::string& mask, std::uint64_t seed) const {
    return root / "checkpoints" / ("ablation_" + mask + "_seed" + std::to_string(seed) + ".ckpt");
}
fs::path AblationLayout::log(const std::string& mask, std::uint64_t seed) const {
    return root / "logs" / ("ablation_" + mask + "_seed" + std::to_string(seed) + ".log");
}
fs::path AblationLayout::results() const { return root / "reports" / "ablation.jsonl"; }
fs::path AblationLayout::config() const { return root / "reports" / "ablation_config.json"; }
fs::path AblationLayout::table() const { return root / "reports" / "ablation.txt"; }
fs::path AblationLayout::grid(std::uint64_t seed) const {
    return root / "images" / ("ablation_seed" + std::to_string(seed) + ".png");
}

namespace {

std::vector<AblationRow> read_results(const fs::path& path) {
    std::vector<AblationRow> rows;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            rows.push_back(ablation_row_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("'" + path.string() + "': " + e.what());
        }
    }
    return rows;
}

nlohmann::json comparable(const AblationConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("resume");
    return j;
}

torch::Tensor preview_tile(TaskKind task, const torch::Tensor& input, const Predictions& p, std::size_t i,
                           std::int64_t num_classes) {
    switch (task) {
    case TaskKind::landmarks: return draw_points(input, p.points[i]);
    case TaskKind::segmentation: return overlay_labels(input, p.masks[i], num_classes);
    default: {
        auto out = p.images[i];
        if (out.size(1) != input.size(1) || out.size(2) != input.size(2)) {
            out = taskdata::resize_image(out, input.size(1), input.size(2));
        }
        return out;
    }
    }
}

} // namespace

AblationResult run_ablation(const AblationConfig& cfg, const model::Checkpoint& pretrained,
                            const taskdata::SampleSet& train, const taskdata::SampleSet& test, const fs::path& out_dir) {
    cfg.validate(pretrained.manifest.backbone);
    if (train.empty()) throw ValidationError("ablation: empty training split");
    if (test.empty()) throw ValidationError("ablation: empty held-out split");
    const auto levels = static_cast<std::size_t>(cfg.adapt.task.decoder_levels(pretrained.manifest.backbone.num_scales));
    std::vector<SkipMask> masks;
    for (const auto& m : cfg.masks) masks.push_back(SkipMask::parse(m, levels));
    std::sort(masks.begin(), masks.end(), model::ablation_order);
    trainer::check_samples(cfg.adapt.task, train, pretrained.manifest.backbone.input_size);
    trainer::check_samples(cfg.adapt.task, test, pretrained.manifest.backbone.input_size);

    const AblationLayout layout{out_dir};
    for (const char* sub : {"checkpoints", "logs", "reports", "images"}) fs::create_directories(out_dir / sub);

    std::vector<AblationRow> rows;
    if (cfg.resume && fs::exists(layout.results())) {
        if (fs::exists(layout.config())) {
            auto previous = read_json_file(layout.config().string());
            previous.erase("resume");
            if (previous != comparable(cfg)) {
                throw ValidationError("ablation: --resume with a configuration that differs from '" +
                                      layout.config().string() + "'");
            }
        }
        rows = read_results(layout.results());
    } else {
        fs::remove(layout.results());
    }
    {
        std::ofstream snap(layout.config(), std::ios::trunc);
        snap << to_json(cfg).dump(2) << "\n";
    }

    auto done = [&](const SkipMask& m, std::uint64_t seed) {
        return std::any_of(rows.begin(), rows.end(), [&](const AblationRow& r) {
            return r.mask == m && r.seed == seed && fs::exists(layout.checkpoint(m.to_string(), seed));
        });
    };

    for (const auto seed : cfg.seeds) {
        for (const auto& mask : masks) {
            const auto name = mask.to_string();
            if (done(mask, seed)) {
                log::info("ablation: " + name + " seed " + std::to_string(seed) + " already complete, skipping");
                continue;
            }
            rows.erase(std::remove_if(rows.begin(), rows.end(),
                                      [&](const AblationRow& r) { return r.mask == mask && r.seed == seed; }),
                       rows.end());
            log::info("ablation: training " + name + " seed " + std::to_string(seed));
            auto adapt = cfg.adapt;
            adapt.mask = name;
            adapt.seed = seed;
            AblationRow row;
            try {
                auto result = trainer::run_adapt(adapt, pretrained, train,
                                                 {layout.checkpoint(name, seed), {}, layout.log(name, seed)});
                row.mask = mask;
                row.seed = seed;
                row.train_size = static_cast<std::int64_t>(train.size());
                row.metrics = evaluate(result.model, test, cfg.eval);
            } catch (const ValidationError&) {
                throw;
            } catch (const std::exception& e) {
                throw RuntimeError("ablation cell " + name + " seed " + std::to_string(seed) + " failed: " + e.what() +
                                   " (completed rows kept in '" + layout.results().string() + "')");
            }
            std::ofstream out(layout.results(), std::ios::app);
            out << to_json(row).dump() << "\n";
            out.flush();
            if (!out) throw RuntimeError("cannot append to '" + layout.results().string() + "'");
            rows.push_back(std::move(row));
        }
    }
    sort_rows(rows, cfg.seeds);

    std::vector<PreviewGrid> grids;
    const auto n_preview = std::min<std::size_t>(static_cast<std::size_t>(cfg.previews), test.size());
    if (n_preview > 0) {
        const taskdata::SampleSet shown(test.begin(), test.begin() + static_cast<std::ptrdiff_t>(n_preview));
        for (const auto seed : cfg.seeds) {
            PreviewGrid grid{layout.grid(seed).stem().string(), {}};
            for (const auto& s : shown) grid.rows.push_back({s.image});
            for (const auto& mask : masks) {
                const auto model = model::restore_bundle(model::load_checkpoint(layout.checkpoint(mask.to_string(), seed)));
                const auto pred = predict(model, shown, cfg.eval.batch_size);
                for (std::size_t i = 0; i < shown.size(); ++i) {
                    grid.rows[i].push_back(
                        preview_tile(cfg.adapt.task.kind, shown[i].image, pred, i, cfg.adapt.task.out_channels));
                }
            }
            grids.push_back(std::move(grid));
        }
    }
    auto report = render_report(rows, grids, reference_values(cfg.adapt.task, cfg.eval), out_dir);
    return {std::move(rows), std::move(report)};
}

} // namespace fsma::evalmetrics
