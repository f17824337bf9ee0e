// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is non-zero when any criterion fails.

#include "support.hpp"

#include "fsma/cli/app.hpp"
#include "fsma/common/errors.hpp"
#include "fsma/common/log.hpp"
#include "fsma/common/rng.hpp"
#include "fsma/evalmetrics/ablation.hpp"
#include "fsma/evalmetrics/metrics.hpp"
#include "fsma/model/bundle.hpp"
#include "fsma/model/checkpoint.hpp"
#include "fsma/model/skip_mask.hpp"
#include "fsma/objectives/discriminators.hpp"
#include "fsma/objectives/losses.hpp"
#include "fsma/objectives/ssim.hpp"
#include "fsma/taskdata/faces.hpp"
#include "fsma/taskdata/heatmaps.hpp"
#include "fsma/taskdata/perlin.hpp"
#include "fsma/taskdata/shadows.hpp"
#include "fsma/trainer/adapt.hpp"
#include "fsma/trainer/pretrain.hpp"
#include "fsma/trainer/verify.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

using namespace fsma;
using model::TaskKind;
using model::TaskSpec;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-3;
constexpr double kSsimSelfTol = 1e-6;
constexpr double kCeUniformTol = 1e-6;
constexpr double kTotalTol = 1e-6;
constexpr double kMetricTol = 1e-9;
constexpr double kHeatmapTol = 0.5;
constexpr double kOverfitL1 = 0.05;
constexpr double kOverfitMse = 1e-3;
constexpr double kAblationMargin = 2.0;

/// Collects failed checks with a short description each.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        ++count_;
        if (!ok) failures_.push_back(what);
    }
    bool pass() const { return failures_.empty(); }
    std::string summary() const {
        if (pass()) return std::to_string(count_) + " checks";
        std::string s = std::to_string(failures_.size()) + "/" + std::to_string(count_) + " failed: " + failures_.front();
        if (failures_.size() > 1) s += " (+" + std::to_string(failures_.size() - 1) + " more)";
        return s;
    }
    std::vector<std::string> notes;

private:
    int count_ = 0;
    std::vector<std::string> failures_;
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

const auto kDouble = torch::TensorOptions().dtype(torch::kFloat64);

/// Relative error between autograd and central differences of f at x.
double gradient_error(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& at, double eps = 1e-6) {
    auto x = at.detach().clone().requires_grad_(true);
    const auto analytic = torch::autograd::grad({f(x)}, {x})[0].detach();
    auto probe = at.detach().clone();
    auto numeric = torch::zeros_like(probe);
    auto pv = probe.view(-1);
    auto nv = numeric.view(-1);
    torch::NoGradGuard g;
    for (std::int64_t i = 0; i < pv.numel(); ++i) {
        const double orig = pv[i].item<double>();
        pv[i] = orig + eps;
        const double up = f(probe).item<double>();
        pv[i] = orig - eps;
        const double down = f(probe).item<double>();
        pv[i] = orig;
        nv[i] = (up - down) / (2 * eps);
    }
    return (analytic - numeric).norm().item<double>() / std::max(numeric.norm().item<double>(), 1e-12);
}

/// Same check with respect to a module parameter, perturbed in place.
double parameter_gradient_error(const std::function<torch::Tensor()>& f, torch::Tensor param, double eps = 1e-6) {
    const auto analytic = torch::autograd::grad({f()}, {param})[0].detach();
    auto numeric = torch::zeros_like(param);
    torch::NoGradGuard g;
    auto pv = param.view(-1);
    auto nv = numeric.view(-1);
    for (std::int64_t i = 0; i < pv.numel(); ++i) {
        const double orig = pv[i].item<double>();
        pv[i] = orig + eps;
        const double up = f().item<double>();
        pv[i] = orig - eps;
        const double down = f().item<double>();
        pv[i] = orig;
        nv[i] = (up - down) / (2 * eps);
    }
    return (analytic - numeric).norm().item<double>() / std::max(numeric.norm().item<double>(), 1e-12);
}

// ------------------------------------------------------------------ 1

Checks losses_and_gradients() {
    Checks c;
    torch::manual_seed(11);
    auto grad_ok = [&](double err, const std::string& name) { c.expect(err < kGradRelTol, name + " rel err " + fmt(err)); };

    const auto target = torch::rand({1, 2, 8, 8}, kDouble);
    const auto sign = torch::where(torch::rand({1, 2, 8, 8}) > 0.5, 1.0, -1.0).to(torch::kFloat64);
    const auto x = target + (torch::rand({1, 2, 8, 8}, kDouble) * 0.4 + 0.05) * sign;
    grad_ok(gradient_error([&](const torch::Tensor& v) { return objectives::l1_rec(v, target); }, x), "L1");
    grad_ok(gradient_error([&](const torch::Tensor& v) { return objectives::heatmap_l2(v, target); }, x), "heatmap L2");

    const objectives::SsimConfig small{5, 1.0, 1e-4, 9e-4};
    const auto ref = torch::rand({1, 1, 8, 8}, kDouble);
    grad_ok(gradient_error([&](const torch::Tensor& v) { return 1.0 - objectives::ssim(v, ref, small); },
                           torch::rand({1, 1, 8, 8}, kDouble)),
            "1 - SSIM");

    const auto logits = torch::randn({2, 4, 6, 6}, kDouble);
    auto labels = torch::randint(0, 4, {2, 6, 6}, torch::kInt64);
    labels.index_put_({0, 0}, objectives::kDefaultIgnoreIndex);
    grad_ok(gradient_error([&](const torch::Tensor& v) { return objectives::seg_cross_entropy(v, labels); }, logits),
            "cross-entropy");

    objectives::ImageDiscriminator disc({3, 4, 2});
    disc.to(torch::kFloat64);
    const auto real = torch::rand({2, 3, 8, 8}, kDouble);
    const auto fake = torch::rand({2, 3, 8, 8}, kDouble);
    grad_ok(gradient_error([&](const torch::Tensor& v) { return objectives::generator_loss(disc, v); }, fake),
            "image adversarial (generator)");
    const auto params = disc.parameters();
    for (const auto& p : {params.front(), params.back()}) {
        grad_ok(parameter_gradient_error([&] { return objectives::discriminator_loss(disc, real, fake); }, p),
                "image adversarial (discriminator)");
    }
    objectives::LatentDiscriminator latent(5, 8);
    latent.to(torch::kFloat64);
    grad_ok(gradient_error([&](const torch::Tensor& v) { return objectives::generator_loss(latent, v); },
                           torch::randn({4, 5}, kDouble)),
            "latent adversarial (generator)");
    const auto prior = torch::randn({4, 5}, kDouble);
    const auto code = torch::randn({4, 5}, kDouble);
    const auto lp = latent.parameters();
    for (const auto& p : {lp.front(), lp.back()}) {
        grad_ok(parameter_gradient_error([&] { return objectives::discriminator_loss(latent, prior, code); }, p),
                "latent adversarial (discriminator)");
    }

    const auto img = torch::rand({2, 3, 32, 32});
    const double self = objectives::ssim(img, img).item<double>();
    c.expect(std::abs(self - 1.0) <= kSsimSelfTol, "SSIM(x,x) = " + fmt(self));

    for (std::int64_t k : {2, 5, 11}) {
        const double ce = objectives::seg_cross_entropy(torch::zeros({2, k, 4, 4}), torch::randint(0, k, {2, 4, 4}, torch::kInt64))
                              .item<double>();
        c.expect(std::abs(ce - std::log(static_cast<double>(k))) <= kCeUniformTol, "uniform CE K=" + std::to_string(k));
    }

    const objectives::LossWeights w;
    c.expect(w.lambda1 == 1.0 && w.lambda2 == 1.0 && w.lambda3 == 1.0 && w.lambda4 == 60.0, "default weights (1,1,1,60)");
    const double rec = 0.13, adv = 0.71, enc = 0.69, s = 0.82;
    const auto report = objectives::unsup_objective(w, {rec, adv, enc, s});
    const double expected = 1.0 * rec + 1.0 * adv + 1.0 * enc + 60.0 * (1.0 - s);
    c.expect(std::abs(report.total - expected) <= kTotalTol, "unsup total " + fmt(report.total) + " vs " + fmt(expected));
    return c;
}

// ------------------------------------------------------------------ 2

taskdata::SampleSet samples_for(TaskKind kind, const std::vector<taskdata::SyntheticFace>& faces) {
    switch (kind) {
    case TaskKind::landmarks: return taskdata::as_landmark_samples(faces);
    case TaskKind::segmentation: return taskdata::as_segmentation_samples(faces);
    case TaskKind::stylization: {
        taskdata::SampleSet out;
        for (const auto& s : taskdata::as_plain_samples(faces))
            out.push_back({s.id, s.image, taskdata::TargetImageAnnotation{1.0 - s.image}});
        return out;
    }
    default: {
        taskdata::ShadowSynthConfig cfg;
        cfg.seed = 3;
        return taskdata::make_shadow_dataset(taskdata::as_plain_samples(faces), cfg, static_cast<std::int64_t>(faces.size()))
            .samples;
    }
    }
}

Checks freezing() {
    Checks c;
    const auto pre = test::untrained_checkpoint(test::tiny_backbone(), 5);
    const auto faces = taskdata::generate_faces(4, 32, 21);
    const std::vector<std::pair<TaskSpec, std::vector<std::string>>> cases{
        {TaskSpec::make(TaskKind::landmarks, 68), {"0000", "1111"}},
        {TaskSpec::make(TaskKind::segmentation, 11), {"00000", "11111"}},
        {TaskSpec::make(TaskKind::stylization, 3), {"00000", "11111"}},
        {TaskSpec::make(TaskKind::shadow_removal, 3), {"00000", "11111"}},
    };
    for (const auto& [task, masks] : cases) {
        const auto samples = samples_for(task.kind, faces);
        for (const auto& mask : masks) {
            auto cfg = trainer::AdaptConfig::toy(task);
            cfg.mask = mask;
            cfg.max_steps = 100;
            cfg.epochs = 0;
            cfg.batch_size = 2;
            cfg.seed = 8;
            const auto res = trainer::run_adapt(cfg, pre, samples);
            const auto report = trainer::verify_frozen(pre, res.checkpoint);
            const std::string cell = model::to_string(task.kind) + "/" + mask;
            c.expect(res.history.size() == 100, cell + " ran " + std::to_string(res.history.size()) + " steps");
            c.expect(report.pass && report.backbone_max == 0.0, cell + " backbone max |delta| " + fmt(report.backbone_max));
            // Bit-level comparison of every pretrained tensor, independent of verify_frozen.
            std::map<std::string, torch::Tensor> after(res.checkpoint.tensors.begin(), res.checkpoint.tensors.end());
            bool identical = true;
            for (const auto& [name, t] : pre.tensors) {
                const auto it = after.find(name);
                identical = identical && it != after.end() && test::bit_equal(t, it->second);
            }
            c.expect(identical, cell + " pretrained tensors not bit-identical");
            const auto changed = trainer::verify_frozen(res.initial, res.checkpoint);
            const auto* itl = changed.group("itl");
            c.expect(itl != nullptr && itl->max_abs > 0.0, cell + " adaptation layers did not train");
        }
    }
    return c;
}

// ------------------------------------------------------------------ 3

Checks structure() {
    Checks c;
    const auto seg = TaskSpec::make(TaskKind::segmentation, 11);
    auto adapted = [&](const std::string& mask, const TaskSpec& task, const model::BackboneConfig& cfg) {
        auto base = model::build_autoencoder(cfg, 3);
        const auto levels = static_cast<std::size_t>(task.decoder_levels(cfg.num_scales));
        return model::attach_head(std::move(base), task, model::SkipMask::parse(mask, levels), 9);
    };
    for (const char* s : {"00000", "10000", "01010", "11100", "11111"}) {
        const auto m = adapted(s, seg, test::tiny_backbone());
        const auto expected = model::SkipMask::parse(s, 5).popcount();
        c.expect(static_cast<std::int64_t>(m.network()->skip->size()) == expected, std::string("popcount ") + s);
        c.expect(model::param_partition_report(m).skip_groups == expected, std::string("skip groups ") + s);
    }
    // One skip layer at stride 32: two bias-free 3x3 convs C -> C and two affine norms.
    for (const auto& cfg : {test::tiny_backbone(), model::BackboneConfig::toy()}) {
        const std::int64_t ch = cfg.width_at(5);
        const std::int64_t hand = 2 * (ch * ch * 3 * 3) + 2 * (2 * ch);
        const auto a = model::param_partition_report(adapted("10000", seg, cfg));
        const auto b = model::param_partition_report(adapted("00000", seg, cfg));
        c.expect(a.trainable_count - b.trainable_count == hand,
                 "delta " + std::to_string(a.trainable_count - b.trainable_count) + " vs hand " + std::to_string(hand));
    }
    const auto lm = TaskSpec::make(TaskKind::landmarks, 68);
    bool rejected = false;
    try {
        adapted("11111", lm, test::tiny_backbone());
    } catch (const ValidationError&) {
        rejected = true;
    }
    c.expect(rejected, "landmark head accepted a 5-digit mask");

    // All-zeros graph: the pyramid features have no path to the output.
    torch::manual_seed(2);
    auto zero = adapted("00000", seg, test::tiny_backbone());
    {
        torch::NoGradGuard g;
        zero.network()->head->weight.normal_(0.0, 0.1);
    }
    const auto x = torch::rand({2, 3, 32, 32});
    const auto encoded = zero.encode(x);
    model::EncoderOutput leaves{{}, encoded.z.detach().requires_grad_(true)};
    std::vector<torch::Tensor> pyramid;
    for (const auto& f : encoded.pyramid) {
        pyramid.push_back(f.detach().requires_grad_(true));
        leaves.pyramid.push_back(pyramid.back());
    }
    model::ForwardTrace trace;
    const auto out = zero.decode(leaves, &trace);
    std::vector<torch::Tensor> inputs = pyramid;
    inputs.push_back(leaves.z);
    const auto grads = torch::autograd::grad({out.sum()}, inputs, {}, false, false, true);
    bool none = true;
    for (std::size_t i = 0; i < pyramid.size(); ++i) none = none && !grads[i].defined();
    c.expect(none, "00000 output depends on pyramid features");
    c.expect(grads.back().defined() && grads.back().abs().sum().item<double>() > 0.0, "00000 output does not depend on z");
    c.expect(trace.pyramid_strides_read.empty(), "00000 trace reads pyramid strides");

    auto one = adapted("10000", seg, test::tiny_backbone());
    {
        torch::NoGradGuard g;
        one.network()->head->weight.normal_(0.0, 0.1);
    }
    model::ForwardTrace one_trace;
    one.decode(one.encode(x), &one_trace);
    c.expect(one_trace.pyramid_strides_read == std::vector<std::int64_t>{32}, "10000 should read stride 32 only");
    return c;
}

// ------------------------------------------------------------------ 4

Checks metric_oracles() {
    Checks c;
    Rng rng(41);
    const auto spec = evalmetrics::NmeSpec::ibug68();
    for (int trial = 0; trial < 50; ++trial) {
        PointSet gt, pred;
        for (int k = 0; k < 68; ++k) {
            gt.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
            pred.push_back({rng.uniform(0, 64), rng.uniform(0, 64)});
        }
        const double io = std::hypot(gt[36].x - gt[45].x, gt[36].y - gt[45].y);
        double in = 0, out = 0;
        for (int k = 0; k < 68; ++k) (k < 17 ? out : in) += std::hypot(pred[k].x - gt[k].x, pred[k].y - gt[k].y);
        const double want_in = 100 * in / 51 / io, want_out = 100 * out / 17 / io, want_all = 100 * (in + out) / 68 / io;
        const auto r = evalmetrics::nme(pred, gt, spec);
        auto close = [](double a, double b) { return std::abs(a - b) <= kMetricTol * std::max(1.0, std::abs(b)); };
        c.expect(close(r.inside, want_in) && close(r.outline, want_out) && close(r.all, want_all), "NME vs brute force");
        c.expect(close(r.all, (51 * r.inside + 17 * r.outline) / 68), "all-NME decomposition");

        const double a = rng.uniform(-std::numbers::pi, std::numbers::pi), s = rng.uniform(0.3, 4.0);
        const double tx = rng.uniform(-30, 30), ty = rng.uniform(-30, 30);
        auto move = [&](const PointSet& p) {
            PointSet q;
            for (const auto& v : p)
                q.push_back({s * (std::cos(a) * v.x - std::sin(a) * v.y) + tx, s * (std::sin(a) * v.x + std::cos(a) * v.y) + ty});
            return q;
        };
        const auto moved = evalmetrics::nme(move(pred), move(gt), spec);
        c.expect(close(moved.all, r.all) && close(moved.inside, r.inside) && close(moved.outline, r.outline),
                 "NME rigid-transform invariance");
    }

    torch::manual_seed(42);
    const auto f1spec = evalmetrics::F1Spec::helen11();
    for (int trial = 0; trial < 50; ++trial) {
        const auto gt = torch::randint(0, 11, {7, 9}, torch::kInt64);
        const auto pred = torch::where(torch::rand({7, 9}) < 0.5, gt, torch::randint(0, 11, {7, 9}, torch::kInt64));
        const auto r = evalmetrics::seg_f1(pred, gt, f1spec);
        const auto p = pred.accessor<std::int64_t, 2>();
        const auto g = gt.accessor<std::int64_t, 2>();
        double sum = 0;
        int defined = 0;
        bool all_match = r.f1.size() == f1spec.groups.size();
        for (std::size_t i = 0; all_match && i < f1spec.groups.size(); ++i) {
            const auto& labels = f1spec.groups[i].labels;
            auto in = [&](std::int64_t v) { return std::find(labels.begin(), labels.end(), v) != labels.end(); };
            double tp = 0, fp = 0, fn = 0;
            for (int y = 0; y < 7; ++y)
                for (int x = 0; x < 9; ++x) {
                    tp += in(p[y][x]) && in(g[y][x]);
                    fp += in(p[y][x]) && !in(g[y][x]);
                    fn += !in(p[y][x]) && in(g[y][x]);
                }
            if (tp + fp + fn == 0) {
                all_match = all_match && !r.f1[i].has_value();
                continue;
            }
            const double f = 100 * 2 * tp / (2 * tp + fp + fn);
            all_match = all_match && r.f1[i].has_value() && std::abs(*r.f1[i] - f) <= kMetricTol;
            const auto& comp = f1spec.component_set;
            if (std::find(comp.begin(), comp.end(), f1spec.groups[i].name) != comp.end()) {
                sum += f;
                ++defined;
            }
        }
        c.expect(all_match, "per-class F1 vs brute force");
        c.expect(defined > 0 && std::abs(r.overall - sum / defined) <= kMetricTol, "macro F1 recomputation");
    }
    return c;
}

// ------------------------------------------------------------------ 5

Checks heatmap_round_trip() {
    Checks c;
    PointSet points;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) points.push_back({2.3 + 3.0 * j + 0.07 * i, 2.6 + 3.0 * i + 0.04 * j});
    const auto hm = taskdata::render_heatmaps(points, 32, 32, {2.0});
    const auto decoded = taskdata::decode_landmarks(hm.maps, 32, 32);
    double worst = 0;
    for (std::size_t k = 0; k < points.size(); ++k) worst = std::max(worst, distance(points[k], decoded[k]));
    c.expect(decoded.size() == 100, "decoded count");
    c.expect(worst <= kHeatmapTol, "worst error " + fmt(worst) + " px");
    c.notes.push_back("worst " + fmt(worst) + " px");
    return c;
}

// ------------------------------------------------------------------ 6

Checks shadow_synthesis() {
    Checks c;
    taskdata::ShadowSynthConfig cfg;
    cfg.coverage_min = 0.15;
    cfg.coverage_max = 0.35;
    const auto faces = taskdata::generate_faces(6, 48, 61);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Rng a(seed), b(seed);
        const auto mask = taskdata::perlin_mask(48, 48, cfg, a);
        c.expect(torch::equal(mask, taskdata::perlin_mask(48, 48, cfg, b)), "perlin mask not deterministic");
        const double cov = mask.to(torch::kFloat64).mean().item<double>();
        c.expect(cov >= cfg.coverage_min && cov <= cfg.coverage_max, "coverage " + fmt(cov));

        const auto& clean = faces[seed].image;
        const double decay = 0.3 + 0.07 * static_cast<double>(seed);
        const auto shadowed = taskdata::synth_shadow(clean, mask, decay);
        const auto m3 = mask.unsqueeze(0).expand_as(clean);
        c.expect(torch::equal(shadowed.masked_select(~m3), clean.masked_select(~m3)), "unmasked pixels changed");
        c.expect(torch::equal(shadowed.masked_select(m3), clean.masked_select(m3) * decay), "masked pixels not scaled by decay");
        c.expect(torch::equal(taskdata::synth_shadow(clean, mask, 1.0), clean), "decay 1 is not the identity");
    }
    Rng a(99), b(100);
    c.expect(!torch::equal(taskdata::perlin_mask(48, 48, cfg, a), taskdata::perlin_mask(48, 48, cfg, b)),
             "different seeds give the same mask");
    return c;
}

// ------------------------------------------------------------------ 7

Checks overfit() {
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    // (a) auto-encoder on 8 images at 64 px, 2000 steps of the toy preset.
    const auto faces = taskdata::generate_faces(8, 64, 1);
    const auto plain = taskdata::as_plain_samples(faces);
    auto pre_cfg = trainer::PretrainConfig::toy();
    pre_cfg.phases = {{64, 2000, 8, 2000}};
    auto pre = trainer::run_pretrain(pre_cfg, plain);
    const auto x = trainer::stack_images(plain);
    double l1 = 0;
    {
        torch::NoGradGuard g;
        pre.model.set_training(false);
        l1 = (pre.model.reconstruct(x) - x).abs().mean().item<double>();
    }
    c.expect(pre.history.size() == 2000, "pretraining ran " + std::to_string(pre.history.size()) + " steps");
    c.expect(l1 < kOverfitL1, "auto-encoder L1 " + fmt(l1));
    c.notes.push_back("(a) L1 " + fmt(l1));

    // (b) landmark adaptation on 5 images, 1000 full-batch steps from the checkpoint above.
    const auto lm = taskdata::as_landmark_samples(taskdata::generate_faces(5, 64, 100));
    const auto task = TaskSpec::make(TaskKind::landmarks, 68);
    auto cfg = trainer::AdaptConfig::toy(task);
    cfg.mask = "1111";
    cfg.max_steps = 1000;
    cfg.epochs = 0;
    cfg.batch_size = 5;
    auto res = trainer::run_adapt(cfg, pre.checkpoint, lm);
    double mse = 0;
    {
        torch::NoGradGuard g;
        res.model.set_training(false);
        const auto out = model::forward_task(res.model, trainer::stack_images(lm));
        const auto target = trainer::build_targets(task, lm, cfg.heatmap, 64);
        mse = (out - target).pow(2).mean().item<double>();
    }
    c.expect(res.history.size() == 1000, "adaptation ran " + std::to_string(res.history.size()) + " steps");
    c.expect(mse < kOverfitMse, "landmark heatmap MSE " + fmt(mse));
    c.notes.push_back("(b) MSE " + fmt(mse));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < 15 * 60, "runtime " + fmt(secs) + " s over 15 min");
    return c;
}

// ------------------------------------------------------------------ 8

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "-q");
    return cli::run(args);
}

Checks directional_ablation() {
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    test::TempDir dir("acceptance_ablation");
    const auto d = [&](const std::string& name) { return (dir / name).string(); };
    c.expect(cli({"gen-faces", "--count", "256", "--seed", "1000", "--prefix", "unl", "--out", d("unlabeled")}) == 0, "gen unlabeled");
    c.expect(cli({"gen-faces", "--count", "100", "--seed", "2000", "--prefix", "tr", "--out", d("train")}) == 0, "gen train");
    c.expect(cli({"gen-faces", "--count", "30", "--seed", "3000", "--prefix", "te", "--out", d("test")}) == 0, "gen test");
    c.expect(cli({"pretrain", "--data", d("unlabeled/clean.txt"), "--out", d("pre")}) == 0, "pretrain");
    c.expect(cli({"ablate", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("train/segmentation.txt"), "--test",
                  d("test/segmentation.txt"), "--mask", "00000", "--mask", "11111", "--seed", "1", "--seed", "2", "--seed", "3",
                  "--max-steps", "1000", "--out", d("ablation")}) == 0,
             "ablate");
    if (!c.pass()) return c;

    std::map<std::pair<std::string, std::uint64_t>, double> f1;
    std::ifstream in(evalmetrics::AblationLayout{dir / "ablation"}.results());
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto row = evalmetrics::ablation_row_from_json(nlohmann::json::parse(line));
        f1[{row.mask.to_string(), row.seed}] = row.metrics.f1->overall;
    }
    int better = 0;
    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto a = f1.find({"00000", seed}), b = f1.find({"11111", seed});
        c.expect(a != f1.end() && b != f1.end(), "missing cell for seed " + std::to_string(seed));
        if (a == f1.end() || b == f1.end()) continue;
        const double delta = b->second - a->second;
        if (delta >= kAblationMargin) ++better;
        std::ostringstream ss;
        ss.precision(2);
        ss << std::fixed << "seed " << seed << " " << a->second << " -> " << b->second << "; ";
        detail += ss.str();
    }
    c.expect(better >= 2, "11111 ahead by >= 2 points in only " + std::to_string(better) + "/3 seeds");
    c.notes.push_back(detail + "better in " + std::to_string(better) + "/3");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs <= 3600, "runtime " + fmt(secs) + " s over 1 h");
    return c;
}

// ------------------------------------------------------------------ 9

/// Every file under `root` except wall-clock timing sidecars.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().extension() == ".timing") continue;
        files[fs::relative(e.path(), root).string()] = test::read_file(e.path());
    }
    return files;
}

Checks determinism() {
    Checks c;
    test::TempDir dir("acceptance_determinism");
    const auto d = [&](const std::string& name) { return (dir / name).string(); };
    {
        std::ofstream(dir / "pre.json") << R"({"pretrain": {"backbone": {"input_size": 32, "base_channels": 8},
            "phases": [{"resolution": 32, "epochs": 1, "batch_size": 2, "max_steps": 3}]}})";
    }
    // Inputs shared by the commands under test.
    c.expect(cli({"gen-faces", "--count", "5", "--size", "32", "--seed", "7", "--prefix", "a", "--out", d("faces")}) == 0, "setup faces");
    c.expect(cli({"gen-faces", "--count", "3", "--size", "32", "--seed", "8", "--prefix", "b", "--out", d("held")}) == 0, "setup held");
    c.expect(cli({"pretrain", "--config", d("pre.json"), "--data", d("faces/clean.txt"), "--seed", "2", "--out", d("pre")}) == 0,
             "setup pretrain");
    c.expect(cli({"adapt", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("faces/segmentation.txt"), "--task",
                  "segmentation", "--mask", "10001", "--max-steps", "3", "--seed", "5", "--out", d("seg")}) == 0,
             "setup adapt");
    if (!c.pass()) return c;
    const auto ckpt = d("seg/checkpoints/adapt.ckpt");

    const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
        {"gen-faces", {"gen-faces", "--count", "4", "--size", "32", "--seed", "3"}},
        {"synth-shadow", {"synth-shadow", "--clean", d("faces/clean.txt"), "--count", "6", "--seed", "4"}},
        {"pretrain", {"pretrain", "--config", d("pre.json"), "--data", d("faces/clean.txt"), "--seed", "2"}},
        {"adapt (landmarks)",
         {"adapt", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("faces/landmarks.txt"), "--task", "landmarks",
          "--channels", "68", "--mask", "1010", "--max-steps", "3", "--seed", "6"}},
        {"adapt (segmentation)",
         {"adapt", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("faces/segmentation.txt"), "--task", "segmentation",
          "--mask", "10001", "--max-steps", "3", "--seed", "5"}},
        {"adapt (stylization)",
         {"adapt", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("faces/clean.txt"), "--task", "stylization",
          "--style", "posterize", "--max-steps", "3", "--seed", "5"}},
        {"infer", {"infer", "--from", ckpt, "--input", d("held/images")}},
        {"eval", {"eval", "--from", ckpt, "--data", d("held/segmentation.txt")}},
        {"ablate",
         {"ablate", "--from", d("pre/checkpoints/pretrain.ckpt"), "--data", d("faces/segmentation.txt"), "--test",
          d("held/segmentation.txt"), "--mask", "00000", "--mask", "10000", "--seed", "1", "--seed", "2", "--max-steps", "2"}},
    };
    for (std::size_t i = 0; i < commands.size(); ++i) {
        const auto& [name, base] = commands[i];
        auto args = base;
        const auto out = dir / ("run_" + std::to_string(i));
        args.insert(args.end(), {"--out", out.string()});
        const int first = cli(args);
        const auto a = first == 0 ? snapshot(out) : std::map<std::string, std::string>{};
        fs::remove_all(out);
        const int second = cli(args);
        const auto b = second == 0 ? snapshot(out) : std::map<std::string, std::string>{};
        c.expect(first == 0 && second == 0, name + " exited " + std::to_string(first) + "/" + std::to_string(second));
        c.expect(!a.empty(), name + " wrote nothing");
        std::string diff;
        for (const auto& [file, bytes] : a) {
            const auto it = b.find(file);
            if (it == b.end() || it->second != bytes) diff = file;
        }
        if (a.size() != b.size()) diff = "file set";
        c.expect(diff.empty(), name + " rerun differs in " + diff);
    }

    // save -> load -> forward
    const auto ck = model::load_checkpoint(ckpt);
    const auto restored = model::restore_bundle(ck);
    model::save_checkpoint(dir / "resaved.ckpt", model::make_checkpoint(restored, ck.manifest.stage, ck.manifest.step));
    auto again = model::load_checkpoint(dir / "resaved.ckpt");
    bool tensors = again.tensors.size() == ck.tensors.size();
    for (std::size_t i = 0; tensors && i < ck.tensors.size(); ++i)
        tensors = again.tensors[i].first == ck.tensors[i].first && test::bit_equal(again.tensors[i].second, ck.tensors[i].second);
    c.expect(tensors, "reloaded tensors differ");
    torch::NoGradGuard g;
    const auto x = torch::rand({3, 3, 32, 32});
    c.expect(torch::equal(model::forward_task(restored, x), model::forward_task(model::restore_bundle(again), x)),
             "forward after reload differs");
    return c;
}

struct Criterion {
    int id;
    std::string name;
    std::function<Checks()> run;
    double budget_s;  // 0: no runtime bound
};

} // namespace

int main(int argc, char** argv) {
    log::set_level(log::Level::warn);
    const std::vector<Criterion> criteria{
        {1, "loss/gradient suite", losses_and_gradients, 60},
        {2, "freezing suite", freezing, 300},
        {3, "structural suite", structure, 0},
        {4, "metric oracle suite", metric_oracles, 10},
        {5, "heatmap round-trip", heatmap_round_trip, 0},
        {6, "shadow synthesis suite", shadow_synthesis, 0},
        {7, "overfit sanity", overfit, 900},
        {8, "directional ablation", directional_ablation, 3600},
        {9, "determinism and checkpointing", determinism, 0},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& cr : criteria) {
        if (!selected.empty() && !selected.count(cr.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Checks result;
        try {
            result = cr.run();
        } catch (const std::exception& e) {
            result.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (cr.budget_s > 0) result.expect(secs <= cr.budget_s, "over budget of " + fmt(cr.budget_s) + " s");
        std::ostringstream line;
        line.precision(1);
        line << std::fixed << "criterion " << cr.id << ": " << (result.pass() ? "PASS" : "FAIL") << "  " << cr.name << "  ["
             << result.summary();
        for (const auto& n : result.notes) line << "; " << n;
        line << "; " << secs << " s]";
        std::cout << line.str() << std::endl;
        failed += !result.pass();
    }
    return failed == 0 ? 0 : 1;
}
