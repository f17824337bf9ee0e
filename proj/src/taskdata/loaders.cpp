#include "fsma/taskdata/loaders.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/log.hpp"
#include "fsma/taskdata/image_io.hpp"
#include "fsma/taskdata/shadows.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace fsma::taskdata {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    if (line.find('\t') != std::string::npos) {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, '\t')) {
            if (!f.empty()) fields.push_back(f);
        }
    } else {
        std::stringstream ss(line);
        std::string f;
        while (ss >> f) fields.push_back(f);
    }
    return fields;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string location(const fs::path& manifest, int line) { return manifest.string() + ":" + std::to_string(line); }

torch::Tensor load_sized(const fs::path& path, const LoadOptions& options) {
    auto image = read_image(path);
    if (options.size > 0) image = resize_image(image, options.size, options.size);
    return image;
}

std::string stem_id(const fs::path& path) { return path.stem().string(); }

} // namespace

std::vector<ManifestRecord> read_manifest(const fs::path& manifest, bool with_annotation) {
    std::ifstream in(manifest);
    if (!in) throw ValidationError("cannot open manifest '" + manifest.string() + "'");
    const auto base = manifest.parent_path();
    std::vector<ManifestRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto fields = split_fields(line);
        const std::size_t expected = with_annotation ? 2 : 1;
        if (fields.size() != expected) {
            throw ValidationError(location(manifest, line_no) + ": expected " + std::to_string(expected) + " field(s)");
        }
        ManifestRecord r;
        r.image = resolve(base, fields[0]);
        if (with_annotation) r.annotation = resolve(base, fields[1]);
        r.line = line_no;
        records.push_back(std::move(r));
    }
    if (records.empty()) throw ValidationError("manifest '" + manifest.string() + "' lists no samples");
    return records;
}

PointSet read_points(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open landmark file '" + path.string() + "'");
    PointSet points;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        Point2 p;
        std::string extra;
        if (!(ss >> p.x >> p.y) || (ss >> extra) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ValidationError(location(path, line_no) + ": expected \"x y\"");
        }
        points.push_back(p);
    }
    if (points.empty()) throw ValidationError("landmark file '" + path.string() + "' is empty");
    return points;
}

void write_points(const fs::path& path, const PointSet& points) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw RuntimeError("cannot write landmark file '" + path.string() + "'");
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%.6f %.6f\n", p.x, p.y);
        out << buf;
    }
}

SampleSet load_landmarks(const fs::path& manifest, std::int64_t expected_k, const LoadOptions& options) {
    SampleSet out;
    for (const auto& r : read_manifest(manifest, true)) {
        auto raw = read_image(r.image);
        auto points = read_points(r.annotation);
        if (expected_k > 0 && static_cast<std::int64_t>(points.size()) != expected_k) {
            throw ValidationError(r.annotation.string() + ": expected " + std::to_string(expected_k) + " points, got " +
                                  std::to_string(points.size()));
        }
        if (!out.empty()) {
            const auto& first = std::get<LandmarkAnnotation>(out.front().annotation).points;
            if (first.size() != points.size()) {
                throw ValidationError(r.annotation.string() + ": point count differs from earlier samples");
            }
        }
        const double w = static_cast<double>(raw.size(2));
        const double h = static_cast<double>(raw.size(1));
        int clipped = 0;
        for (auto& p : points) {
            const Point2 c{std::clamp(p.x, 0.0, w - 1.0), std::clamp(p.y, 0.0, h - 1.0)};
            if (c.x != p.x || c.y != p.y) ++clipped;
            p = c;
        }
        if (clipped > 0) {
            log::warn(r.annotation.string() + ": clipped " + std::to_string(clipped) + " point(s) to the image bounds");
        }
        if (options.size > 0) {
            const double sx = static_cast<double>(options.size) / w;
            const double sy = static_cast<double>(options.size) / h;
            for (auto& p : points) p = {(p.x + 0.5) * sx - 0.5, (p.y + 0.5) * sy - 0.5};  // pixel centres map to pixel centres
            raw = resize_image(raw, options.size, options.size);
        }
        out.push_back({stem_id(r.image), raw, LandmarkAnnotation{std::move(points)}});
    }
    return out;
}

SampleSet load_segmentation(const fs::path& manifest, std::int64_t num_classes, std::int64_t ignore_index,
                            const LoadOptions& options) {
    if (num_classes < 2) throw ValidationError("load_segmentation: num_classes must be >= 2");
    SampleSet out;
    for (const auto& r : read_manifest(manifest, true)) {
        auto image = read_image(r.image);
        auto labels = read_mask(r.annotation);
        if (labels.size(0) != image.size(1) || labels.size(1) != image.size(2)) {
            throw ValidationError(r.annotation.string() + ": mask size differs from its image");
        }
        const auto bad = (labels >= num_classes).logical_and(labels != ignore_index);
        if (bad.any().item<bool>()) {
            const auto value = labels.masked_select(bad)[0].item<std::int64_t>();
            throw ValidationError(r.annotation.string() + ": label " + std::to_string(value) + " >= " +
                                  std::to_string(num_classes) + " classes");
        }
        if (options.size > 0) {
            image = resize_image(image, options.size, options.size);
            labels = resize_mask(labels, options.size, options.size);
        }
        out.push_back({stem_id(r.image), image, ClassMaskAnnotation{labels, num_classes}});
    }
    return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ValidationError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

SampleSet load_style_pairs(const fs::path& input_dir, const fs::path& target_dir, const LoadOptions& options) {
    const auto inputs = list_images(input_dir);
    const auto targets = list_images(target_dir);
    if (inputs.size() != targets.size()) {
        throw ValidationError("style pairs: '" + input_dir.string() + "' has " + std::to_string(inputs.size()) +
                              " images but '" + target_dir.string() + "' has " + std::to_string(targets.size()));
    }
    if (inputs.empty()) throw ValidationError("style pairs: '" + input_dir.string() + "' contains no images");
    SampleSet out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].stem() != targets[i].stem()) {
            throw ValidationError("style pairs: no target matching '" + inputs[i].filename().string() + "'");
        }
        auto image = load_sized(inputs[i], options);
        auto target = load_sized(targets[i], options);
        if (!image.sizes().equals(target.sizes())) {
            throw ValidationError("style pairs: size mismatch for '" + inputs[i].filename().string() + "'");
        }
        out.push_back({stem_id(inputs[i]), image, TargetImageAnnotation{target}});
    }
    return out;
}

SampleSet load_clean_images(const fs::path& source, const LoadOptions& options) {
    std::vector<fs::path> files;
    if (fs::is_directory(source)) {
        files = list_images(source);
    } else {
        for (const auto& r : read_manifest(source, false)) files.push_back(r.image);
    }
    if (files.empty()) throw ValidationError("no images found in '" + source.string() + "'");
    SampleSet out;
    for (const auto& f : files) out.push_back({stem_id(f), load_sized(f, options), std::monostate{}});
    return out;
}

SampleSet load_shadow_pairs(const fs::path& manifest, const LoadOptions& options) {
    const auto rows = read_shadow_manifest(manifest);
    if (rows.empty()) throw ValidationError("shadow manifest '" + manifest.string() + "' lists no pairs");
    const auto base = manifest.parent_path();
    SampleSet out;
    for (const auto& row : rows) {
        auto shadowed = load_sized(resolve(base, row.shadowed_path), options);
        auto clean = load_sized(resolve(base, row.clean_path), options);
        auto mask = read_mask(resolve(base, row.mask_path));
        if (options.size > 0) mask = resize_mask(mask, options.size, options.size);
        if (mask.size(0) != clean.size(1) || mask.size(1) != clean.size(2) || !shadowed.sizes().equals(clean.sizes())) {
            throw ValidationError("shadow pair " + std::to_string(row.record.index) + ": size mismatch");
        }
        out.push_back({"shadow_" + std::to_string(row.record.index), shadowed, ShadowAnnotation{clean, mask > 0}});
    }
    return out;
}

} // namespace fsma::taskdata
