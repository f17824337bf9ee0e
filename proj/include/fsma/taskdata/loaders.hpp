#pragma once

#include "fsma/taskdata/sample.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fsma::taskdata {

/// Dataset manifest: one record per line, '#' starts a comment line. Fields are
/// tab-separated when the line contains a tab, otherwise whitespace-separated.
/// Paths are relative to the manifest's directory unless absolute.
///
///   landmarks:     <image> <points.txt>      points file: one "x y" line per landmark
///   segmentation:  <image> <mask.png>        8-bit indexed mask
///   clean images:  <image>
struct ManifestRecord {
    std::filesystem::path image;
    std::filesystem::path annotation;  // empty when the format has none
    int line = 0;
};

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& manifest, bool with_annotation);

struct LoadOptions {
    std::int64_t size = 0;  // square resize target; 0 keeps the stored resolution
};

/// "x y" per line; blank lines and '#' comments skipped.
PointSet read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path, const PointSet& points);

/// Every file must hold the same number of points (and `expected_k` points when
/// nonzero). Points outside the image are clipped to its bounds with a warning.
SampleSet load_landmarks(const std::filesystem::path& manifest, std::int64_t expected_k = 0,
                         const LoadOptions& options = {});

/// Labels must be < num_classes, except `ignore_index`, which passes through.
SampleSet load_segmentation(const std::filesystem::path& manifest, std::int64_t num_classes,
                            std::int64_t ignore_index = 255, const LoadOptions& options = {});

/// Parallel directories matched by file stem; counts and stems must agree.
SampleSet load_style_pairs(const std::filesystem::path& input_dir, const std::filesystem::path& target_dir,
                           const LoadOptions& options = {});

/// A directory of images (sorted by file name) or a manifest of image paths.
SampleSet load_clean_images(const std::filesystem::path& source, const LoadOptions& options = {});

/// Pairs listed in a shadow manifest (see shadows.hpp).
SampleSet load_shadow_pairs(const std::filesystem::path& manifest, const LoadOptions& options = {});

/// Sorted image files in a directory (non-recursive).
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

} // namespace fsma::taskdata
