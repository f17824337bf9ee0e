#include "fsma/taskdata/faces.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/taskdata/image_io.hpp"
#include "fsma/taskdata/loaders.hpp"

#include <opencv2/imgproc.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace fsma::taskdata {

namespace {

enum Cls : std::uint8_t { BG, SKIN, LBROW, RBROW, LEYE, REYE, NOSE, ULIP, INMOUTH, LLIP, HAIR };

using Rgb = std::array<double, 3>;

// Face frame: u across the face (-1 left cheek, +1 right), v from forehead (-1) to chin (+1).
struct Frame {
    double cx, cy, a, b, cos_t, sin_t;

    Point2 to_pixel(double u, double v) const {
        const double x = a * u;
        const double y = b * v;
        return {cx + cos_t * x - sin_t * y, cy + sin_t * x + cos_t * y};
    }
    Point2 to_face(double px, double py) const {
        const double dx = px - cx;
        const double dy = py - cy;
        return {(cos_t * dx + sin_t * dy) / a, (-sin_t * dx + cos_t * dy) / b};
    }
};

struct Geometry {
    double eye_y, eye_u, eye_hw, eye_ho;
    double brow_gap, brow_thick;
    double nose_top, nose_bottom, nose_hw;
    double mouth_y, mouth_hw, upper_lip, lower_lip, mouth_open;
    double yaw;  // horizontal shift of the inner features
    double fringe;
    bool has_hair;
};

using Curve = std::vector<Point2>;  // face-frame coordinates

struct EyeShape {
    double cu, cv, hw, ho;
    Point2 at(double t, bool upper) const {
        return {cu + hw * std::cos(t), cv + (upper ? -ho : ho) * std::sin(t)};
    }
};

double lip_profile(double s) { return std::pow(std::max(0.0, 1.0 - s * s), 0.7); }

Rgb jitter(const Rgb& c, Rng& rng, double amount) {
    Rgb out{};
    for (int i = 0; i < 3; ++i) out[i] = std::clamp(c[i] + rng.uniform(-amount, amount), 0.0, 1.0);
    return out;
}

Rgb scale(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

void fill(cv::Mat& canvas, const Frame& frame, const Curve& curve, std::uint8_t value) {
    constexpr int kShift = 4;
    std::vector<cv::Point> pts;
    pts.reserve(curve.size());
    for (const auto& p : curve) {
        const auto q = frame.to_pixel(p.x, p.y);
        // fillPoly treats integer coordinates as pixel centres; shift so pixel (i, j) covers [j, j+1).
        pts.emplace_back(static_cast<int>(std::lround((q.x - 0.5) * (1 << kShift))),
                         static_cast<int>(std::lround((q.y - 0.5) * (1 << kShift))));
    }
    cv::fillPoly(canvas, std::vector<std::vector<cv::Point>>{pts}, cv::Scalar(value), cv::LINE_8, kShift);
}

Curve ellipse_curve(double cu, double cv, double ru, double rv, int n = 40) {
    Curve c;
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * i / n;
        c.push_back({cu + ru * std::cos(t), cv + rv * std::sin(t)});
    }
    return c;
}

Geometry draw_geometry(Rng& rng) {
    Geometry g{};
    g.eye_y = rng.uniform(-0.2, -0.1);
    g.eye_u = rng.uniform(0.38, 0.46);
    g.eye_hw = rng.uniform(0.17, 0.22);
    g.eye_ho = rng.uniform(0.06, 0.11);
    g.brow_gap = rng.uniform(0.2, 0.27);
    g.brow_thick = rng.uniform(0.06, 0.1);
    g.nose_top = g.eye_y - 0.05;
    g.nose_bottom = rng.uniform(0.25, 0.34);
    g.nose_hw = rng.uniform(0.15, 0.21);
    g.mouth_y = rng.uniform(0.56, 0.64);
    g.mouth_hw = rng.uniform(0.28, 0.38);
    g.upper_lip = rng.uniform(0.06, 0.1);
    g.lower_lip = rng.uniform(0.07, 0.12);
    g.mouth_open = rng.bernoulli(0.5) ? rng.uniform(0.03, 0.09) : 0.0;
    g.yaw = rng.uniform(-0.1, 0.1);
    g.fringe = rng.uniform(-0.85, -0.6);
    g.has_hair = rng.bernoulli(0.9);
    return g;
}

PointSet canonical_landmarks(const Geometry& g) {
    PointSet p(68);
    for (int i = 0; i <= 16; ++i) {
        const double phi = std::numbers::pi * i / 16.0;
        p[i] = {-std::cos(phi), -0.1 + 1.05 * std::sin(phi)};
    }
    const double y = g.yaw;
    for (int i = 0; i < 5; ++i) {
        const double t = i / 4.0;
        const double arch = 0.07 * std::sin(std::numbers::pi * (0.3 + 0.7 * t));
        p[17 + i] = {y - (g.eye_u + 0.3) + 0.6 * t, g.eye_y - g.brow_gap - arch};
        p[26 - i] = {y + (g.eye_u + 0.3) - 0.6 * t, g.eye_y - g.brow_gap - arch};
    }
    for (int i = 0; i < 4; ++i) p[27 + i] = {y, g.nose_top + (g.nose_bottom - 0.04 - g.nose_top) * i / 3.0};
    for (int i = 0; i < 5; ++i) {
        const double s = -1.0 + 0.5 * i;
        p[31 + i] = {y + 0.6 * g.nose_hw * s, g.nose_bottom + 0.03 * (1.0 - std::abs(s))};
    }
    const EyeShape left{y - g.eye_u, g.eye_y, g.eye_hw, g.eye_ho};
    const EyeShape right{y + g.eye_u, g.eye_y, g.eye_hw, g.eye_ho};
    const double third = std::numbers::pi / 3.0;
    p[36] = left.at(std::numbers::pi, true);
    p[37] = left.at(2 * third, true);
    p[38] = left.at(third, true);
    p[39] = left.at(0.0, true);
    p[40] = left.at(third, false);
    p[41] = left.at(2 * third, false);
    p[42] = right.at(std::numbers::pi, true);
    p[43] = right.at(2 * third, true);
    p[44] = right.at(third, true);
    p[45] = right.at(0.0, true);
    p[46] = right.at(third, false);
    p[47] = right.at(2 * third, false);
    const double mx = y;
    const double my = g.mouth_y;
    const double hw = g.mouth_hw;
    const double ihw = 0.85 * hw;
    p[48] = {mx - hw, my};
    p[54] = {mx + hw, my};
    for (int i = 0; i < 5; ++i) {
        const double s = -2.0 / 3.0 + i / 3.0;
        p[49 + i] = {mx + hw * s, my - g.upper_lip * lip_profile(s)};
        p[59 - i] = {mx + hw * s, my + g.lower_lip * lip_profile(s)};
    }
    p[60] = {mx - ihw, my};
    p[64] = {mx + ihw, my};
    for (int i = 0; i < 3; ++i) {
        const double s = -0.5 + 0.5 * i;
        p[61 + i] = {mx + ihw * s, my - 0.5 * g.mouth_open * (1.0 - s * s)};
        p[67 - i] = {mx + ihw * s, my + 0.5 * g.mouth_open * (1.0 - s * s)};
    }
    return p;
}

cv::Mat draw_labels(const Geometry& g, const PointSet& lm, const Frame& frame, int size) {
    cv::Mat labels = cv::Mat::zeros(size, size, CV_8UC1);
    if (g.has_hair) fill(labels, frame, ellipse_curve(0.0, -0.3, 1.2, 0.95), HAIR);
    fill(labels, frame, Curve{{-0.45, 0.6}, {0.45, 0.6}, {0.5, 3.0}, {-0.5, 3.0}}, SKIN);
    Curve face(lm.begin(), lm.begin() + 17);
    for (int i = 1; i < 24; ++i) {
        const double t = std::numbers::pi * i / 24.0;
        face.push_back({std::cos(t), -0.1 - 0.92 * std::sin(t)});
    }
    fill(labels, frame, face, SKIN);
    if (g.has_hair) {
        Curve fringe;
        for (int i = 0; i <= 24; ++i) {
            const double t = std::numbers::pi * i / 24.0;
            const double v = -0.1 - 0.96 * std::sin(t);
            const double wave = 0.04 * std::sin(6.0 * t);
            fringe.push_back({1.02 * std::cos(t), std::min(v, g.fringe + wave)});
        }
        fill(labels, frame, fringe, HAIR);
    }
    for (int side = 0; side < 2; ++side) {
        Curve brow;
        const int first = side == 0 ? 17 : 22;
        for (int i = 0; i < 5; ++i) brow.push_back({lm[first + i].x, lm[first + i].y - 0.5 * g.brow_thick});
        for (int i = 4; i >= 0; --i) {
            const double taper = (side == 0 ? i : 4 - i) == 0 ? 0.4 : 1.0;
            brow.push_back({lm[first + i].x, lm[first + i].y + 0.5 * g.brow_thick * taper});
        }
        fill(labels, frame, brow, side == 0 ? LBROW : RBROW);
    }
    for (int side = 0; side < 2; ++side) {
        const EyeShape eye{g.yaw + (side == 0 ? -g.eye_u : g.eye_u), g.eye_y, g.eye_hw, g.eye_ho};
        Curve c;
        for (int i = 0; i < 32; ++i) {
            const double t = 2.0 * std::numbers::pi * i / 32.0;
            c.push_back({eye.cu + eye.hw * std::cos(t), eye.cv + eye.ho * std::sin(t)});
        }
        fill(labels, frame, c, side == 0 ? LEYE : REYE);
    }
    const double ny = g.nose_bottom;
    fill(labels, frame,
         Curve{{g.yaw - 0.06, g.nose_top},
               {g.yaw + 0.06, g.nose_top},
               {g.yaw + 0.8 * g.nose_hw, ny - 0.06},
               {g.yaw + g.nose_hw, ny},
               {g.yaw, ny + 0.05},
               {g.yaw - g.nose_hw, ny},
               {g.yaw - 0.8 * g.nose_hw, ny - 0.06}},
         NOSE);
    const double mx = g.yaw;
    const double my = g.mouth_y;
    const double hw = g.mouth_hw;
    const double ihw = 0.85 * hw;
    Curve upper;
    Curve lower;
    Curve inner;
    constexpr int n = 16;
    for (int i = 0; i <= n; ++i) {
        const double s = -1.0 + 2.0 * i / n;
        upper.push_back({mx + hw * s, my - g.upper_lip * lip_profile(s)});
        lower.push_back({mx + hw * s, my + g.lower_lip * lip_profile(s)});
    }
    for (int i = n; i >= 0; --i) {
        const double s = -1.0 + 2.0 * i / n;
        upper.push_back({mx + ihw * s, my - 0.5 * g.mouth_open * (1.0 - s * s)});
        lower.push_back({mx + ihw * s, my + 0.5 * g.mouth_open * (1.0 - s * s)});
    }
    fill(labels, frame, upper, ULIP);
    fill(labels, frame, lower, LLIP);
    if (g.mouth_open > 0.0) {
        for (int i = 0; i <= n; ++i) {
            const double s = -1.0 + 2.0 * i / n;
            inner.push_back({mx + ihw * s, my - 0.5 * g.mouth_open * (1.0 - s * s)});
        }
        for (int i = n - 1; i > 0; --i) {
            const double s = -1.0 + 2.0 * i / n;
            inner.push_back({mx + ihw * s, my + 0.5 * g.mouth_open * (1.0 - s * s)});
        }
        fill(labels, frame, inner, INMOUTH);
    }
    return labels;
}

cv::Mat paint(const Geometry& g, const cv::Mat& labels, const Frame& frame, Rng& rng) {
    const int size = labels.rows;
    const Rgb skin = jitter(rng.bernoulli(0.5) ? Rgb{0.86, 0.68, 0.56} : Rgb{0.55, 0.38, 0.28}, rng, 0.1);
    const Rgb hair = jitter(rng.bernoulli(0.5) ? Rgb{0.15, 0.1, 0.07} : Rgb{0.55, 0.4, 0.2}, rng, 0.08);
    const Rgb brow = scale(hair, rng.uniform(0.6, 0.9));
    const Rgb bg = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
    const Rgb bg2 = jitter(bg, rng, 0.25);
    const Rgb sclera = jitter({0.92, 0.92, 0.9}, rng, 0.04);
    const Rgb iris = jitter({0.25, 0.18, 0.12}, rng, 0.12);
    const Rgb lip = jitter({0.72, 0.32, 0.33}, rng, 0.08);
    const Rgb lower_lip = scale(lip, 1.08);
    const Rgb mouth = {0.18, 0.06, 0.06};
    const double nose_shade = rng.uniform(0.78, 0.88);
    const double iris_r = g.eye_ho * rng.uniform(0.8, 1.0);
    const double light_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double light_strength = rng.uniform(0.0, 0.2);
    const double hair_freq = rng.uniform(10.0, 25.0);
    const double bg_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);

    cv::Mat img(size, size, CV_32FC3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            const auto f = frame.to_face(px, py);
            const double nx = px / size - 0.5;
            const double ny = py / size - 0.5;
            Rgb c{};
            switch (labels.at<std::uint8_t>(y, x)) {
            case BG: {
                const double t = std::clamp(0.5 + std::cos(bg_angle) * nx + std::sin(bg_angle) * ny, 0.0, 1.0);
                for (int k = 0; k < 3; ++k) c[k] = bg[k] * (1 - t) + bg2[k] * t;
                break;
            }
            case SKIN: {
                const double r2 = f.x * f.x + 0.6 * f.y * f.y;
                c = scale(skin, 1.05 - 0.25 * std::min(r2, 1.5));
                break;
            }
            case HAIR: c = scale(hair, 1.0 + 0.12 * std::sin(hair_freq * f.x + 3.0 * f.y)); break;
            case LBROW:
            case RBROW: c = brow; break;
            case LEYE:
            case REYE: {
                const double cu = g.yaw + (labels.at<std::uint8_t>(y, x) == LEYE ? -g.eye_u : g.eye_u);
                const double du = (f.x - cu) * frame.a;
                const double dv = (f.y - g.eye_y) * frame.b;
                c = std::hypot(du, dv) < iris_r * frame.b ? iris : sclera;
                break;
            }
            case NOSE: {
                c = scale(skin, nose_shade);
                for (int s = -1; s <= 1; s += 2) {
                    const double du = (f.x - (g.yaw + 0.45 * s * g.nose_hw)) * frame.a;
                    const double dv = (f.y - (g.nose_bottom - 0.01)) * frame.b;
                    if (std::hypot(du, dv) < 0.035 * frame.b) c = scale(skin, 0.35);
                }
                break;
            }
            case ULIP: c = lip; break;
            case LLIP: c = lower_lip; break;
            case INMOUTH: c = f.y < g.mouth_y - 0.15 * g.mouth_open ? Rgb{0.9, 0.88, 0.82} : mouth; break;
            default: break;
            }
            const double light = 1.0 + light_strength * (std::cos(light_angle) * nx + std::sin(light_angle) * ny) * 2.0;
            auto& out = img.at<cv::Vec3f>(y, x);
            for (int k = 0; k < 3; ++k) {
                const double noise = 0.015 * rng.normal();
                out[2 - k] = static_cast<float>(std::clamp(c[k] * light + noise, 0.0, 1.0));
            }
        }
    }
    cv::GaussianBlur(img, img, cv::Size(0, 0), 0.5, 0.5, cv::BORDER_REPLICATE);
    return img;
}

} // namespace

const std::vector<std::string>& face_class_names() {
    static const std::vector<std::string> names = {"background", "skin",   "l_brow",   "r_brow", "l_eye", "r_eye",
                                                   "nose",       "u_lip",  "in_mouth", "l_lip",  "hair"};
    return names;
}

const std::vector<std::int64_t>& face_landmark_mirror() {
    static const std::vector<std::int64_t> table = [] {
        std::vector<std::int64_t> m(68);
        for (int i = 0; i < 68; ++i) m[i] = i;
        auto pair = [&](int a, int b) {
            m[a] = b;
            m[b] = a;
        };
        for (int i = 0; i < 8; ++i) pair(i, 16 - i);
        for (int i = 0; i < 5; ++i) pair(17 + i, 26 - i);
        pair(31, 35);
        pair(32, 34);
        pair(36, 45);
        pair(37, 44);
        pair(38, 43);
        pair(39, 42);
        pair(40, 47);
        pair(41, 46);
        pair(48, 54);
        pair(49, 53);
        pair(50, 52);
        pair(55, 59);
        pair(56, 58);
        pair(60, 64);
        pair(61, 63);
        pair(65, 67);
        return m;
    }();
    return table;
}

const std::vector<std::int64_t>& face_class_mirror() {
    static const std::vector<std::int64_t> table = {BG, SKIN, RBROW, LBROW, REYE, LEYE, NOSE, ULIP, INMOUTH, LLIP, HAIR};
    return table;
}

SyntheticFace generate_face(std::int64_t size, Rng& rng) {
    if (size < 16) throw ValidationError("generate_face: size must be >= 16");
    const double s = static_cast<double>(size);
    Frame frame{};
    frame.cx = s * (0.5 + rng.uniform(-0.05, 0.05));
    frame.cy = s * (0.53 + rng.uniform(-0.04, 0.04));
    frame.a = s * rng.uniform(0.27, 0.32);
    frame.b = frame.a * rng.uniform(1.15, 1.3);
    const double roll = rng.uniform(-0.2, 0.2);
    frame.cos_t = std::cos(roll);
    frame.sin_t = std::sin(roll);
    const auto g = draw_geometry(rng);
    const auto canonical = canonical_landmarks(g);
    const auto labels = draw_labels(g, canonical, frame, static_cast<int>(size));
    const auto image = paint(g, labels, frame, rng);

    SyntheticFace face;
    face.image = from_mat(image).clamp(0.0, 1.0);
    face.labels = mask_from_mat(labels).clone();
    face.landmarks.reserve(canonical.size());
    // Pixel centre convention: pixel j spans [j, j + 1), so subtract 0.5 to land on index coordinates.
    for (const auto& p : canonical) {
        const auto q = frame.to_pixel(p.x, p.y);
        face.landmarks.push_back({q.x - 0.5, q.y - 0.5});
    }
    return face;
}

std::vector<SyntheticFace> generate_faces(std::int64_t count, std::int64_t size, std::uint64_t seed) {
    if (count <= 0) throw ValidationError("generate_faces: count must be positive");
    std::vector<SyntheticFace> faces;
    faces.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        faces.push_back(generate_face(size, rng));
    }
    return faces;
}

namespace {

std::string face_id(const std::string& prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%05zu", i);
    return prefix + buf;
}

} // namespace

SampleSet as_plain_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix) {
    SampleSet out;
    for (std::size_t i = 0; i < faces.size(); ++i) out.push_back({face_id(prefix, i), faces[i].image, std::monostate{}});
    return out;
}

SampleSet as_landmark_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix) {
    SampleSet out;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        out.push_back({face_id(prefix, i), faces[i].image, LandmarkAnnotation{faces[i].landmarks}});
    }
    return out;
}

SampleSet as_segmentation_samples(const std::vector<SyntheticFace>& faces, const std::string& prefix) {
    SampleSet out;
    for (std::size_t i = 0; i < faces.size(); ++i) {
        out.push_back({face_id(prefix, i), faces[i].image, ClassMaskAnnotation{faces[i].labels, kFaceClasses}});
    }
    return out;
}

void write_face_dataset(const std::filesystem::path& dir, const std::vector<SyntheticFace>& faces,
                        const std::string& prefix) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "points");
    fs::create_directories(dir / "masks");
    std::ofstream lm(dir / "landmarks.txt");
    std::ofstream seg(dir / "segmentation.txt");
    std::ofstream clean(dir / "clean.txt");
    if (!lm || !seg || !clean) throw RuntimeError("cannot write manifests under '" + dir.string() + "'");
    for (std::size_t i = 0; i < faces.size(); ++i) {
        const auto id = face_id(prefix, i);
        const auto image = "images/" + id + ".png";
        const auto points = "points/" + id + ".txt";
        const auto mask = "masks/" + id + ".png";
        write_image(dir / image, faces[i].image);
        write_points(dir / points, faces[i].landmarks);
        write_mask(dir / mask, faces[i].labels);
        lm << image << ' ' << points << '\n';
        seg << image << ' ' << mask << '\n';
        clean << image << '\n';
    }
}

} // namespace fsma::taskdata
