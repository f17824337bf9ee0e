#pragma once

#include "fsma/common/json_reader.hpp"
#include "fsma/common/rng.hpp"
#include "fsma/taskdata/sample.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsma::taskdata {

/// `mixed` draws perlin or silhouette per pair with equal probability.
enum class MaskKind { perlin, silhouette, mixed };

std::string to_string(MaskKind kind);
MaskKind parse_mask_kind(const std::string& text);

struct PerlinParams {
    int octaves = 4;
    double base_frequency = 3.0;  // noise cycles across the image at the first octave
    double persistence = 0.5;
    double threshold = 0.55;      // applied to noise mapped into [0, 1]
    double threshold_jitter = 0.1;
};

struct ShadowSynthConfig {
    MaskKind mask_kind = MaskKind::perlin;
    PerlinParams perlin;
    double decay_min = 0.3;
    double decay_max = 0.7;
    double coverage_min = 0.1;
    double coverage_max = 0.4;
    int max_attempts = 50;
    bool feather = false;         // soften the mask boundary inward
    double feather_sigma = 1.5;
    bool srgb = false;            // apply decay to linearised sRGB instead of stored intensity
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const ShadowSynthConfig& cfg);
void merge(JsonReader reader, ShadowSynthConfig& cfg);

/// Thresholded fractal noise. The threshold is re-drawn (fresh noise field each
/// time) until coverage lands in [coverage_min, coverage_max]; RuntimeError
/// after max_attempts. Returns an H x W bool tensor.
torch::Tensor perlin_mask(std::int64_t h, std::int64_t w, const ShadowSynthConfig& cfg, Rng& rng);

/// Names of the bundled silhouette shapes.
const std::vector<std::string>& silhouette_names();

/// A bundled shape placed at a random position, scale and rotation, with the
/// same coverage window and attempt limit as perlin_mask.
torch::Tensor silhouette_mask(std::int64_t h, std::int64_t w, const ShadowSynthConfig& cfg, Rng& rng);

struct ShadowOptions {
    bool feather = false;
    double feather_sigma = 1.5;
    bool srgb = false;
};

/// Multiplies masked pixels by `decay` (in stored intensity, or in linearised
/// sRGB when options.srgb is set). Unmasked pixels are copied bit-for-bit. With feathering, the factor ramps from 1 at the mask edge
/// to `decay` in the interior, never leaving the mask.
torch::Tensor synth_shadow(const torch::Tensor& clean, const torch::Tensor& mask, double decay,
                           const ShadowOptions& options = {});

/// One generated pair; everything needed to regenerate it exactly.
struct ShadowRecord {
    std::int64_t index = 0;
    std::string clean_id;
    std::uint64_t seed = 0;
    double decay = 1.0;
    MaskKind mask_kind = MaskKind::perlin;  // never `mixed`: the resolved kind
};

struct ShadowDataset {
    SampleSet samples;  // image = shadowed; annotation = ShadowAnnotation
    std::vector<ShadowRecord> records;
};

/// Draws n_out clean images with replacement and gives each a fresh mask and
/// decay. Pair i uses seed derive_seed(cfg.seed, i).
ShadowDataset make_shadow_dataset(const SampleSet& clean_set, const ShadowSynthConfig& cfg, std::int64_t n_out);

/// Rebuilds one pair from its record.
AnnotatedSample regenerate_shadow_pair(const AnnotatedSample& clean, const ShadowRecord& record,
                                       const ShadowSynthConfig& cfg);

/// Manifest rows as written by write_shadow_manifest; paths are relative to the
/// manifest's directory.
struct ShadowManifestRow {
    ShadowRecord record;
    std::string shadowed_path;
    std::string clean_path;
    std::string mask_path;
};

/// Tab-separated text with a header line; decay printed with round-trip precision.
void write_shadow_manifest(const std::filesystem::path& path, const std::vector<ShadowManifestRow>& rows);
std::vector<ShadowManifestRow> read_shadow_manifest(const std::filesystem::path& path);

} // namespace fsma::taskdata
