#include "fsma/taskdata/shadows.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/taskdata/perlin.hpp"

#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace fsma::taskdata {

namespace {

using Contour = std::vector<cv::Point2d>;
using Shape = std::vector<Contour>;

Contour ellipse(double cx, double cy, double rx, double ry, int n = 32) {
    Contour c;
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * i / n;
        c.emplace_back(cx + rx * std::cos(t), cy + ry * std::sin(t));
    }
    return c;
}

Contour quad(double x0, double y0, double x1, double y1, double half_width) {
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    const double len = std::hypot(dx, dy);
    const double nx = -dy / len * half_width;
    const double ny = dx / len * half_width;
    return {{x0 + nx, y0 + ny}, {x1 + nx, y1 + ny}, {x1 - nx, y1 - ny}, {x0 - nx, y0 - ny}};
}

// Shapes live roughly in [-1, 1]^2; contours are filled independently.
const std::vector<std::pair<std::string, Shape>>& shapes() {
    static const std::vector<std::pair<std::string, Shape>> table = [] {
        std::vector<std::pair<std::string, Shape>> t;
        t.push_back({"disc", {ellipse(0, 0, 1, 1)}});
        {
            Contour leaf;
            for (int i = 0; i <= 16; ++i) {
                const double a = std::numbers::pi * i / 16;
                leaf.emplace_back(-std::cos(a), -0.45 * std::sin(a));
            }
            for (int i = 1; i < 16; ++i) {
                const double a = std::numbers::pi * i / 16;
                leaf.emplace_back(std::cos(a), 0.45 * std::sin(a));
            }
            t.push_back({"leaf", {leaf, quad(1.0, 0.0, 1.4, 0.1, 0.05)}});
        }
        t.push_back({"hand",
                     {Contour{{-0.5, -0.1}, {0.5, -0.1}, {0.45, 0.8}, {-0.45, 0.8}},
                      quad(-0.38, 0.0, -0.45, -0.85, 0.1), quad(-0.12, 0.0, -0.12, -1.0, 0.1),
                      quad(0.14, 0.0, 0.16, -0.95, 0.1), quad(0.38, 0.0, 0.45, -0.7, 0.09),
                      quad(-0.45, 0.5, -0.95, 0.05, 0.11)}});
        t.push_back({"hat", {ellipse(0, 0.25, 1.0, 0.22), ellipse(0, -0.1, 0.5, 0.45)}});
        t.push_back({"branch",
                     {quad(-1.0, 0.3, 1.0, -0.3, 0.08), quad(-0.3, 0.09, -0.6, -0.6, 0.05),
                      quad(0.2, -0.06, 0.5, 0.6, 0.05), quad(0.5, -0.15, 0.9, -0.8, 0.04),
                      ellipse(-0.6, -0.7, 0.22, 0.14), ellipse(0.55, 0.7, 0.22, 0.14), ellipse(0.95, -0.9, 0.2, 0.12)}});
        t.push_back({"blinds",
                     {quad(-1, -0.75, 1, -0.75, 0.14), quad(-1, -0.25, 1, -0.25, 0.14), quad(-1, 0.25, 1, 0.25, 0.14),
                      quad(-1, 0.75, 1, 0.75, 0.14)}});
        return t;
    }();
    return table;
}

double shape_area(const Shape& shape) {
    double area = 0.0;
    for (const auto& c : shape) {
        double a = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            const auto& p = c[i];
            const auto& q = c[(i + 1) % c.size()];
            a += p.x * q.y - q.x * p.y;
        }
        area += std::abs(a) * 0.5;
    }
    return area;
}

torch::Tensor to_bool_tensor(const cv::Mat& m) {
    return torch::from_blob(m.data, {m.rows, m.cols}, torch::kUInt8).clone().to(torch::kBool);
}

double coverage_of(const torch::Tensor& mask) { return mask.to(torch::kFloat64).mean().item<double>(); }

bool in_window(double coverage, const ShadowSynthConfig& cfg) {
    return coverage >= cfg.coverage_min && coverage <= cfg.coverage_max;
}

torch::Tensor srgb_to_linear(const torch::Tensor& x) {
    return torch::where(x <= 0.04045, x / 12.92, torch::pow((x + 0.055) / 1.055, 2.4));
}

torch::Tensor linear_to_srgb(const torch::Tensor& x) {
    return torch::where(x <= 0.0031308, x * 12.92, 1.055 * torch::pow(x, 1.0 / 2.4) - 0.055);
}

struct PairDraw {
    MaskKind kind;
    double decay;
    torch::Tensor mask;
};

PairDraw draw_pair(std::int64_t h, std::int64_t w, std::uint64_t seed, const ShadowSynthConfig& cfg) {
    Rng rng(seed);
    PairDraw d;
    d.kind = cfg.mask_kind;
    if (d.kind == MaskKind::mixed) d.kind = rng.bernoulli(0.5) ? MaskKind::silhouette : MaskKind::perlin;
    d.decay = cfg.decay_min + (cfg.decay_max - cfg.decay_min) * rng.uniform();
    d.mask = d.kind == MaskKind::perlin ? perlin_mask(h, w, cfg, rng) : silhouette_mask(h, w, cfg, rng);
    return d;
}

ShadowOptions options_of(const ShadowSynthConfig& cfg) { return {cfg.feather, cfg.feather_sigma, cfg.srgb}; }

AnnotatedSample make_pair(const AnnotatedSample& clean, const PairDraw& d, const ShadowSynthConfig& cfg,
                          std::int64_t index) {
    AnnotatedSample s;
    s.id = "shadow_" + std::to_string(index);
    s.image = synth_shadow(clean.image, d.mask, d.decay, options_of(cfg));
    s.annotation = ShadowAnnotation{clean.image, d.mask};
    return s;
}

} // namespace

std::string to_string(MaskKind kind) {
    switch (kind) {
    case MaskKind::perlin: return "perlin";
    case MaskKind::silhouette: return "silhouette";
    case MaskKind::mixed: return "mixed";
    }
    return "unknown";
}

MaskKind parse_mask_kind(const std::string& text) {
    if (text == "perlin") return MaskKind::perlin;
    if (text == "silhouette") return MaskKind::silhouette;
    if (text == "mixed") return MaskKind::mixed;
    throw ValidationError("unknown shadow mask kind '" + text + "'");
}

void ShadowSynthConfig::validate() const {
    if (!(decay_min > 0.0 && decay_min <= decay_max && decay_max <= 1.0)) {
        throw ValidationError("shadow: decay range must satisfy 0 < min <= max <= 1");
    }
    if (!(coverage_min > 0.0 && coverage_min <= coverage_max && coverage_max < 1.0)) {
        throw ValidationError("shadow: coverage range must satisfy 0 < min <= max < 1");
    }
    if (perlin.octaves < 1) throw ValidationError("shadow: perlin.octaves must be >= 1");
    if (!(perlin.base_frequency > 0.0)) throw ValidationError("shadow: perlin.base_frequency must be positive");
    if (!(perlin.persistence > 0.0)) throw ValidationError("shadow: perlin.persistence must be positive");
    if (!(perlin.threshold_jitter >= 0.0)) throw ValidationError("shadow: perlin.threshold_jitter must be >= 0");
    if (max_attempts < 1) throw ValidationError("shadow: max_attempts must be >= 1");
    if (feather && !(feather_sigma > 0.0)) throw ValidationError("shadow: feather_sigma must be positive");
}

nlohmann::json to_json(const ShadowSynthConfig& cfg) {
    return {{"mask_kind", to_string(cfg.mask_kind)},
            {"perlin",
             {{"octaves", cfg.perlin.octaves},
              {"base_frequency", cfg.perlin.base_frequency},
              {"persistence", cfg.perlin.persistence},
              {"threshold", cfg.perlin.threshold},
              {"threshold_jitter", cfg.perlin.threshold_jitter}}},
            {"decay", {{"min", cfg.decay_min}, {"max", cfg.decay_max}}},
            {"coverage", {{"min", cfg.coverage_min}, {"max", cfg.coverage_max}}},
            {"max_attempts", cfg.max_attempts},
            {"feather", cfg.feather},
            {"feather_sigma", cfg.feather_sigma},
            {"srgb", cfg.srgb},
            {"seed", cfg.seed}};
}

void merge(JsonReader reader, ShadowSynthConfig& cfg) {
    if (reader.has("mask_kind")) cfg.mask_kind = parse_mask_kind(reader.require<std::string>("mask_kind"));
    if (reader.has("perlin")) {
        auto p = reader.child("perlin");
        p.read("octaves", cfg.perlin.octaves);
        p.read("base_frequency", cfg.perlin.base_frequency);
        p.read("persistence", cfg.perlin.persistence);
        p.read("threshold", cfg.perlin.threshold);
        p.read("threshold_jitter", cfg.perlin.threshold_jitter);
        p.finish();
    }
    if (reader.has("decay")) {
        auto d = reader.child("decay");
        d.read("min", cfg.decay_min);
        d.read("max", cfg.decay_max);
        d.finish();
    }
    if (reader.has("coverage")) {
        auto c = reader.child("coverage");
        c.read("min", cfg.coverage_min);
        c.read("max", cfg.coverage_max);
        c.finish();
    }
    reader.read("max_attempts", cfg.max_attempts);
    reader.read("feather", cfg.feather);
    reader.read("feather_sigma", cfg.feather_sigma);
    reader.read("srgb", cfg.srgb);
    reader.read("seed", cfg.seed);
    reader.finish();
}

torch::Tensor perlin_mask(std::int64_t h, std::int64_t w, const ShadowSynthConfig& cfg, Rng& rng) {
    cfg.validate();
    if (h <= 0 || w <= 0) throw ValidationError("perlin_mask: size must be positive");
    const double scale = cfg.perlin.base_frequency / static_cast<double>(std::max(h, w));
    std::vector<double> field(static_cast<std::size_t>(h * w));
    double last = 0.0;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const PerlinNoise noise(rng.next());
        const double ox = rng.uniform(0.0, 256.0);
        const double oy = rng.uniform(0.0, 256.0);
        const double threshold =
            cfg.perlin.threshold + rng.uniform(-cfg.perlin.threshold_jitter, cfg.perlin.threshold_jitter);
        auto mask = torch::zeros({h, w}, torch::kBool);
        auto acc = mask.accessor<bool, 2>();
        std::int64_t on = 0;
        for (std::int64_t y = 0; y < h; ++y) {
            for (std::int64_t x = 0; x < w; ++x) {
                const double n = noise.fbm(ox + (x + 0.5) * scale, oy + (y + 0.5) * scale, cfg.perlin.octaves,
                                           cfg.perlin.persistence);
                const bool v = 0.5 * (n + 1.0) > threshold;
                acc[y][x] = v;
                on += v;
            }
        }
        last = static_cast<double>(on) / static_cast<double>(h * w);
        if (in_window(last, cfg)) return mask;
    }
    throw RuntimeError("perlin_mask: coverage window [" + std::to_string(cfg.coverage_min) + ", " +
                       std::to_string(cfg.coverage_max) + "] not reached after " + std::to_string(cfg.max_attempts) +
                       " attempts (last " + std::to_string(last) + ")");
}

const std::vector<std::string>& silhouette_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, _] : shapes()) n.push_back(name);
        return n;
    }();
    return names;
}

torch::Tensor silhouette_mask(std::int64_t h, std::int64_t w, const ShadowSynthConfig& cfg, Rng& rng) {
    cfg.validate();
    if (h <= 0 || w <= 0) throw ValidationError("silhouette_mask: size must be positive");
    constexpr int kShift = 4;  // sub-pixel bits for fillPoly
    double last = 0.0;
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const auto& [name, shape] = shapes()[rng.index(shapes().size())];
        const double target = rng.uniform(cfg.coverage_min, cfg.coverage_max);
        const double scale = std::sqrt(target * static_cast<double>(h * w) / shape_area(shape));
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double cx = rng.uniform(0.3, 0.7) * static_cast<double>(w);
        const double cy = rng.uniform(0.3, 0.7) * static_cast<double>(h);
        const double ca = std::cos(angle);
        const double sa = std::sin(angle);
        cv::Mat canvas = cv::Mat::zeros(static_cast<int>(h), static_cast<int>(w), CV_8UC1);
        for (const auto& contour : shape) {
            std::vector<cv::Point> pts;
            for (const auto& p : contour) {
                const double x = cx + scale * (ca * p.x - sa * p.y);
                const double y = cy + scale * (sa * p.x + ca * p.y);
                pts.emplace_back(static_cast<int>(std::lround(x * (1 << kShift))),
                                 static_cast<int>(std::lround(y * (1 << kShift))));
            }
            cv::fillPoly(canvas, std::vector<std::vector<cv::Point>>{pts}, cv::Scalar(1), cv::LINE_8, kShift);
        }
        auto mask = to_bool_tensor(canvas);
        last = coverage_of(mask);
        if (in_window(last, cfg)) return mask;
    }
    throw RuntimeError("silhouette_mask: coverage window not reached after " + std::to_string(cfg.max_attempts) +
                       " attempts (last " + std::to_string(last) + ")");
}

torch::Tensor synth_shadow(const torch::Tensor& clean, const torch::Tensor& mask, double decay,
                           const ShadowOptions& options) {
    if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("synth_shadow: decay must be in (0, 1]");
    if (clean.dim() != 3 || clean.size(0) != 3) throw ValidationError("synth_shadow: clean must be 3 x H x W");
    if (mask.dim() != 2 || mask.size(0) != clean.size(1) || mask.size(1) != clean.size(2)) {
        throw ValidationError("synth_shadow: mask must be H x W matching the image");
    }
    const auto m = mask.to(torch::kBool).unsqueeze(0).expand_as(clean);
    torch::Tensor factor = torch::full({}, decay, clean.options());
    if (options.feather) {
        cv::Mat soft(static_cast<int>(mask.size(0)), static_cast<int>(mask.size(1)), CV_32FC1);
        auto mf = mask.to(torch::kFloat32).contiguous();
        std::memcpy(soft.data, mf.data_ptr<float>(), sizeof(float) * static_cast<std::size_t>(mf.numel()));
        cv::GaussianBlur(soft, soft, cv::Size(0, 0), options.feather_sigma, options.feather_sigma,
                         cv::BORDER_REPLICATE);
        // Blur is 0.5 at a straight edge; remap [0.5, 1] -> [0, 1] so the ramp stays inside the mask.
        auto ramp = torch::from_blob(soft.data, {soft.rows, soft.cols}, torch::kFloat32).clone();
        ramp = ((ramp - 0.5) * 2.0).clamp(0.0, 1.0).to(clean.dtype());
        factor = (1.0 - ramp * (1.0 - decay)).unsqueeze(0);
    }
    if (options.srgb) {
        const auto darkened = linear_to_srgb(srgb_to_linear(clean) * factor).clamp(0.0, 1.0);
        return torch::where(m, torch::minimum(darkened, clean), clean);
    }
    return torch::where(m, clean * factor, clean);
}

ShadowDataset make_shadow_dataset(const SampleSet& clean_set, const ShadowSynthConfig& cfg, std::int64_t n_out) {
    cfg.validate();
    if (clean_set.empty()) throw ValidationError("make_shadow_dataset: clean set is empty");
    if (n_out <= 0) throw ValidationError("make_shadow_dataset: n_out must be positive");
    Rng picker(derive_seed(cfg.seed, 0xC1EA4ULL));
    ShadowDataset out;
    out.samples.reserve(static_cast<std::size_t>(n_out));
    out.records.reserve(static_cast<std::size_t>(n_out));
    for (std::int64_t i = 0; i < n_out; ++i) {
        const auto& clean = clean_set[picker.index(clean_set.size())];
        ShadowRecord rec;
        rec.index = i;
        rec.clean_id = clean.id;
        rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        const auto d = draw_pair(clean.height(), clean.width(), rec.seed, cfg);
        rec.decay = d.decay;
        rec.mask_kind = d.kind;
        out.samples.push_back(make_pair(clean, d, cfg, i));
        out.records.push_back(rec);
    }
    return out;
}

AnnotatedSample regenerate_shadow_pair(const AnnotatedSample& clean, const ShadowRecord& record,
                                       const ShadowSynthConfig& cfg) {
    cfg.validate();
    const auto d = draw_pair(clean.height(), clean.width(), record.seed, cfg);
    if (d.kind != record.mask_kind || d.decay != record.decay) {
        throw ValidationError("regenerate_shadow_pair: record " + std::to_string(record.index) +
                              " does not match the given configuration");
    }
    return make_pair(clean, d, cfg, record.index);
}

void write_shadow_manifest(const std::filesystem::path& path, const std::vector<ShadowManifestRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write shadow manifest '" + path.string() + "'");
    out << "# index\tclean_id\tseed\tdecay\tmask_kind\tshadowed\tclean\tmask\n";
    char decay[64];
    for (const auto& r : rows) {
        std::snprintf(decay, sizeof decay, "%.17g", r.record.decay);
        out << r.record.index << '\t' << r.record.clean_id << '\t' << r.record.seed << '\t' << decay << '\t'
            << to_string(r.record.mask_kind) << '\t' << r.shadowed_path << '\t' << r.clean_path << '\t' << r.mask_path
            << '\n';
    }
    if (!out) throw RuntimeError("failed writing shadow manifest '" + path.string() + "'");
}

std::vector<ShadowManifestRow> read_shadow_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open shadow manifest '" + path.string() + "'");
    std::vector<ShadowManifestRow> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) f.push_back(field);
        if (f.size() != 8) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 8 tab-separated fields");
        }
        ShadowManifestRow row;
        try {
            row.record.index = std::stoll(f[0]);
            row.record.clean_id = f[1];
            row.record.seed = std::stoull(f[2]);
            row.record.decay = std::stod(f[3]);
        } catch (const std::exception&) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
        row.record.mask_kind = parse_mask_kind(f[4]);
        row.shadowed_path = f[5];
        row.clean_path = f[6];
        row.mask_path = f[7];
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace fsma::taskdata
