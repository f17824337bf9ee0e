#pragma once

#include "fsma/evalmetrics/evaluate.hpp"
#include "fsma/model/checkpoint.hpp"
#include "fsma/model/skip_mask.hpp"
#include "fsma/trainer/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace fsma::evalmetrics {

struct AblationConfig {
    std::vector<std::string> masks;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    trainer::AdaptConfig adapt;  // template; mask and seed are set per cell
    EvalSpec eval;
    std::int64_t previews = 4;   // held-out samples shown in each grid
    bool resume = false;

    /// Needs the backbone depth to check mask lengths against the task.
    void validate(const model::BackboneConfig& backbone) const;
};

nlohmann::json to_json(const AblationConfig& cfg);
void merge(JsonReader reader, AblationConfig& cfg);

struct AblationRow {
    model::SkipMask mask;
    std::uint64_t seed = 0;
    std::int64_t train_size = 0;
    MetricReport metrics;
};

nlohmann::json to_json(const AblationRow& row);
AblationRow ablation_row_from_json(const nlohmann::json& j);

/// Popcount, then lexicographic mask order; seeds keep their relative order.
void sort_rows(std::vector<AblationRow>& rows, const std::vector<std::uint64_t>& seed_order);

/// Full-scale figures for the same mask settings, shown beside desk-scale rows.
struct ReferenceValue {
    std::string mask;
    std::string metric;
    double value = 0.0;
    std::string note;
};

/// Non-empty only for the 11-class face-parsing and 68-point landmark setups.
std::vector<ReferenceValue> reference_values(const model::TaskSpec& task, const EvalSpec& spec);

/// Per-cell prediction tiles for one seed: column 0 is the input, then one
/// column per mask in row order.
struct PreviewGrid {
    std::string name;
    std::vector<std::vector<torch::Tensor>> rows;
};

struct ReportFiles {
    std::filesystem::path table;
    std::vector<std::filesystem::path> grids;
};

/// Aligned text table (byte-deterministic for equal rows) plus one PNG per grid.
std::string render_table(const std::vector<AblationRow>& rows, const std::vector<ReferenceValue>& references);
ReportFiles render_report(const std::vector<AblationRow>& rows, const std::vector<PreviewGrid>& grids,
                          const std::vector<ReferenceValue>& references, const std::filesystem::path& out_dir);

/// Paths under <out>/{checkpoints,logs,reports,images}.
struct AblationLayout {
    std::filesystem::path root;

    std::filesystem::path checkpoint(const std::string& mask, std::uint64_t seed) const;
    std::filesystem::path log(const std::string& mask, std::uint64_t seed) const;
    std::filesystem::path results() const;  // line-delimited JSON, one row per line
    std::filesystem::path config() const;
    std::filesystem::path table() const;
    std::filesystem::path grid(std::uint64_t seed) const;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    ReportFiles report;
};

/// Trains one adapted model per (mask, seed) from the same pretrained
/// checkpoint, evaluates each on the held-out split and writes the report.
/// Every mask is validated before any training. Rows are appended to the
/// results file as cells finish, so a failing cell leaves earlier rows intact;
/// with `resume`, cells already present in the results file are skipped.
AblationResult run_ablation(const AblationConfig& cfg, const model::Checkpoint& pretrained,
                            const taskdata::SampleSet& train, const taskdata::SampleSet& test,
                            const std::filesystem::path& out_dir);

} // namespace fsma::evalmetrics
