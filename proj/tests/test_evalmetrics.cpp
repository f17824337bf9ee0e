#include "support.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/evalmetrics/ablation.hpp"
#include "fsma/evalmetrics/evaluate.hpp"
#include "fsma/evalmetrics/metrics.hpp"
#include "fsma/evalmetrics/visualize.hpp"
#include "fsma/taskdata/faces.hpp"
#include "fsma/taskdata/image_io.hpp"

#include "doctest_torch.hpp"

#include <cmath>
#include <numbers>

using namespace fsma;
using namespace fsma::evalmetrics;
using model::TaskKind;
using model::TaskSpec;

namespace {

struct BruteNme {
    double inside, outline, all;
};

/// Straight from the definition: mean point error over a subset, divided by the outer-eye-corner distance.
BruteNme brute_nme(const PointSet& pred, const PointSet& gt) {
    const double io = std::hypot(gt[36].x - gt[45].x, gt[36].y - gt[45].y);
    double in = 0, out = 0;
    for (std::size_t k = 0; k < 68; ++k) {
        const double d = std::hypot(pred[k].x - gt[k].x, pred[k].y - gt[k].y);
        (k <= 16 ? out : in) += d;
    }
    return {100.0 * in / 51.0 / io, 100.0 * out / 17.0 / io, 100.0 * (in + out) / 68.0 / io};
}

PointSet random_points(Rng& rng, double span) {
    PointSet p;
    for (int k = 0; k < 68; ++k) p.push_back({rng.uniform(0, span), rng.uniform(0, span)});
    return p;
}

PointSet transform(const PointSet& pts, double angle, double scale, double tx, double ty) {
    PointSet out;
    const double c = std::cos(angle), s = std::sin(angle);
    for (const auto& p : pts) out.push_back({scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty});
    return out;
}

/// Per-group pixel counts from nested loops; F1 in percent or nullopt.
std::vector<std::optional<double>> brute_f1(const torch::Tensor& pred, const torch::Tensor& gt, const F1Spec& spec) {
    std::vector<std::optional<double>> out;
    const auto p = pred.accessor<std::int64_t, 2>();
    const auto g = gt.accessor<std::int64_t, 2>();
    for (const auto& group : spec.groups) {
        auto in = [&](std::int64_t v) { return std::find(group.labels.begin(), group.labels.end(), v) != group.labels.end(); };
        double tp = 0, fp = 0, fn = 0;
        for (std::int64_t y = 0; y < pred.size(0); ++y)
            for (std::int64_t x = 0; x < pred.size(1); ++x) {
                const bool a = in(p[y][x]), b = in(g[y][x]);
                tp += a && b;
                fp += a && !b;
                fn += !a && b;
            }
        if (tp + fp + fn == 0) out.push_back(std::nullopt);
        else out.push_back(100.0 * 2 * tp / (2 * tp + fp + fn));
    }
    return out;
}

torch::Tensor grid4(std::initializer_list<std::int64_t> v) { return torch::tensor(std::vector<std::int64_t>(v)).view({4, 4}); }

AblationRow make_row(const std::string& mask, std::uint64_t seed, double overall) {
    AblationRow r;
    r.mask = model::SkipMask::parse(mask, 5);
    r.seed = seed;
    r.train_size = 10;
    r.metrics.task = TaskKind::segmentation;
    r.metrics.count = 5;
    F1Report f1;
    f1.names = {"background", "face", "eyebrows", "eyes", "nose", "mouth", "hair"};
    f1.f1 = {90.0, 80.0, overall, overall, overall, overall, std::nullopt};
    f1.overall = overall;
    r.metrics.f1 = f1;
    return r;
}

trainer::AdaptConfig tiny_adapt() {
    auto cfg = trainer::AdaptConfig::toy(TaskSpec::make(TaskKind::segmentation, 11));
    cfg.max_steps = 2;
    cfg.batch_size = 2;
    return cfg;
}

} // namespace

TEST_CASE("nme matches the definition on random instances") {
    Rng rng(5);
    const auto spec = NmeSpec::ibug68();
    spec.validate();
    for (int trial = 0; trial < 50; ++trial) {
        const auto gt = random_points(rng, 100);
        const auto pred = random_points(rng, 100);
        const auto got = nme(pred, gt, spec);
        const auto want = brute_nme(pred, gt);
        CHECK(got.inside == doctest::Approx(want.inside).epsilon(1e-9));
        CHECK(got.outline == doctest::Approx(want.outline).epsilon(1e-9));
        CHECK(got.all == doctest::Approx(want.all).epsilon(1e-9));
        // The all-points figure is the point-count-weighted mix of the two subsets.
        CHECK(got.all == doctest::Approx((51.0 * got.inside + 17.0 * got.outline) / 68.0).epsilon(1e-12));

        const double angle = rng.uniform(-std::numbers::pi, std::numbers::pi);
        const double scale = rng.uniform(0.2, 5.0);
        const double tx = rng.uniform(-50, 50), ty = rng.uniform(-50, 50);
        const auto moved = nme(transform(pred, angle, scale, tx, ty), transform(gt, angle, scale, tx, ty), spec);
        CHECK(moved.all == doctest::Approx(got.all).epsilon(1e-9));
        CHECK(moved.inside == doctest::Approx(got.inside).epsilon(1e-9));
    }
    const auto gt = random_points(rng, 50);
    const auto zero = nme(gt, gt, spec);
    CHECK(zero.all == 0.0);
    CHECK(zero.inside == 0.0);
    CHECK(zero.outline == 0.0);
    CHECK(mean_nme({{1, 2, 3}, {3, 4, 5}}).outline == doctest::Approx(3.0));
}

TEST_CASE("nme rejects malformed input") {
    Rng rng(6);
    const auto spec = NmeSpec::ibug68();
    auto gt = random_points(rng, 10);
    CHECK_THROWS_AS(nme(PointSet(67), gt, spec), ValidationError);
    gt[45] = gt[36];
    CHECK_THROWS_AS(nme(random_points(rng, 10), gt, spec), ValidationError);
    auto broken = spec;
    broken.inside.pop_back();
    CHECK_THROWS_AS(broken.validate(), ValidationError);
    CHECK(nme_spec_from_json(to_json(spec)).inside == spec.inside);
}

TEST_CASE("f1 matches nested-loop counts on random instances") {
    torch::manual_seed(7);
    const auto spec = F1Spec::helen11();
    spec.validate();
    for (int trial = 0; trial < 50; ++trial) {
        const auto gt = torch::randint(0, 11, {9, 13}, torch::kInt64);
        auto pred = torch::where(torch::rand({9, 13}) < 0.6, gt, torch::randint(0, 11, {9, 13}, torch::kInt64));
        if (trial % 5 == 0) pred.masked_fill_(pred == 6, 1);  // sometimes drop the nose from the prediction
        const auto got = seg_f1(pred, gt, spec);
        const auto want = brute_f1(pred, gt, spec);
        REQUIRE(got.f1.size() == want.size());
        double sum = 0;
        int defined = 0;
        for (std::size_t i = 0; i < want.size(); ++i) {
            REQUIRE(got.f1[i].has_value() == want[i].has_value());
            if (want[i]) CHECK(*got.f1[i] == doctest::Approx(*want[i]).epsilon(1e-9));
            const auto& name = spec.groups[i].name;
            if (want[i] && std::find(spec.component_set.begin(), spec.component_set.end(), name) != spec.component_set.end()) {
                sum += *want[i];
                ++defined;
            }
        }
        CHECK(got.overall == doctest::Approx(sum / defined).epsilon(1e-9));
    }
}

TEST_CASE("f1 on a hand-counted 4 x 4 example") {
    const auto spec = F1Spec::per_class({"bg", "a", "b"}, {"a", "b"});
    const auto gt = grid4({0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 0, 0, 2, 2, 0, 0});
    const auto pred = grid4({0, 1, 1, 1, 0, 0, 1, 0, 2, 0, 0, 0, 2, 2, 0, 0});
    const auto r = seg_f1(pred, gt, spec);
    // a: tp 3, fp 1, fn 1.  b: tp 3, fp 0, fn 1.  bg: tp 7, fp 2, fn 1.
    CHECK(*r.get("a") == doctest::Approx(75.0).epsilon(1e-12));
    CHECK(*r.get("b") == doctest::Approx(600.0 / 7.0).epsilon(1e-12));
    CHECK(*r.get("bg") == doctest::Approx(1400.0 / 17.0).epsilon(1e-12));
    CHECK(r.overall == doctest::Approx((75.0 + 600.0 / 7.0) / 2.0).epsilon(1e-12));

    // Relabelling a <-> b swaps their scores and leaves the overall unchanged.
    auto swap = [](const torch::Tensor& t) { return torch::where(t == 1, 2, torch::where(t == 2, 1, t)); };
    const auto s = seg_f1(swap(pred), swap(gt), spec);
    CHECK(*s.get("a") == doctest::Approx(*r.get("b")));
    CHECK(*s.get("b") == doctest::Approx(*r.get("a")));
    CHECK(s.overall == doctest::Approx(r.overall));

    // A class absent from both masks is undefined and drops out of the mean.
    const auto three = F1Spec::per_class({"bg", "a", "b", "c"}, {"a", "b", "c"});
    const auto t = seg_f1(pred, gt, three);
    CHECK_FALSE(t.get("c").has_value());
    CHECK(t.overall == doctest::Approx(r.overall));

    CHECK_THROWS_AS(seg_f1(pred, grid4({0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 3}), spec), ValidationError);
    CHECK_THROWS_AS(seg_f1(pred, gt.view({2, 8}), spec), ValidationError);
}

TEST_CASE("pooled f1 counts equal the counts of the concatenated split") {
    torch::manual_seed(8);
    const auto spec = F1Spec::helen11();
    std::vector<torch::Tensor> preds, gts;
    F1Counts pooled = f1_counts(torch::zeros({1, 8}, torch::kInt64), torch::zeros({1, 8}, torch::kInt64), spec);
    for (int i = 0; i < 4; ++i) {
        gts.push_back(torch::randint(0, 11, {6, 8}, torch::kInt64));
        preds.push_back(torch::randint(0, 11, {6, 8}, torch::kInt64));
        pooled += f1_counts(preds.back(), gts.back(), spec);
    }
    const auto joined = seg_f1(torch::cat({torch::zeros({1, 8}, torch::kInt64), torch::cat(preds)}),
                               torch::cat({torch::zeros({1, 8}, torch::kInt64), torch::cat(gts)}), spec);
    const auto from_counts = f1_from_counts(pooled, spec);
    for (std::size_t i = 0; i < joined.f1.size(); ++i) CHECK(*joined.f1[i] == doctest::Approx(*from_counts.f1[i]).epsilon(1e-12));
    CHECK(joined.overall == doctest::Approx(from_counts.overall).epsilon(1e-12));
    CHECK(f1_spec_from_json(to_json(spec)).component_set == spec.component_set);
}

TEST_CASE("scoring perfect predictions") {
    const auto faces = taskdata::generate_faces(3, 32, 4);
    Predictions lm;
    Predictions seg;
    Predictions img;
    for (const auto& f : faces) {
        lm.points.push_back(f.landmarks);
        seg.masks.push_back(f.labels);
        img.images.push_back(f.image);
    }
    const EvalSpec spec;
    const auto a = score(TaskKind::landmarks, lm, taskdata::as_landmark_samples(faces), spec);
    CHECK(a.nme->all == 0.0);
    CHECK(a.primary_name() == "nme_all");
    const auto b = score(TaskKind::segmentation, seg, taskdata::as_segmentation_samples(faces), spec);
    CHECK(b.f1->overall == doctest::Approx(100.0));
    CHECK(b.primary() == doctest::Approx(100.0));
    CHECK(b.count == 3);
    // Predictions at another resolution are resampled to the ground truth.
    Predictions big;
    for (const auto& f : faces) big.masks.push_back(taskdata::resize_mask(f.labels, 64, 64));
    CHECK(score(TaskKind::segmentation, big, taskdata::as_segmentation_samples(faces), spec).f1->overall == doctest::Approx(100.0));
    const auto c = score(TaskKind::reconstruction, img, taskdata::as_plain_samples(faces), spec);
    CHECK(c.image->l1 == 0.0);
    CHECK(c.image->ssim == doctest::Approx(1.0).epsilon(1e-6));

    const auto back = metric_report_from_json(to_json(b));
    CHECK(back.f1->overall == b.f1->overall);
    CHECK(back.f1->names == b.f1->names);
    CHECK_FALSE(back.f1->get("hair") == std::nullopt);
    CHECK(to_text(b).find("100.00") != std::string::npos);

    lm.points.pop_back();
    CHECK_THROWS_AS(score(TaskKind::landmarks, lm, taskdata::as_landmark_samples(faces), spec), ValidationError);
}

TEST_CASE("ablation table lists one line per cell and is deterministic") {
    std::vector<AblationRow> rows{make_row("11111", 1, 70.0), make_row("00000", 1, 60.0)};
    sort_rows(rows, {1});
    CHECK(rows[0].mask.to_string() == "00000");
    const auto refs = reference_values(TaskSpec::make(TaskKind::segmentation, 11), EvalSpec{});
    REQUIRE(refs.size() == 2);
    CHECK(refs[0].value == 85.23);
    CHECK(refs[1].value == 90.32);
    const auto text = render_table(rows, refs);
    CHECK(text == render_table(rows, refs));
    int data_lines = 0;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("00000 ", 0) == 0 || line.rfind("11111 ", 0) == 0) ++data_lines;
    }
    CHECK(data_lines == 2);
    CHECK(text.find("higher is better") != std::string::npos);
    CHECK(text.find("+10.00") != std::string::npos);
    CHECK(reference_values(TaskSpec::make(TaskKind::segmentation, 5), EvalSpec{}).empty());
    CHECK(reference_values(TaskSpec::make(TaskKind::landmarks, 68), EvalSpec{}).size() == 2);

    const auto j = to_json(rows[1]);
    const auto row = ablation_row_from_json(j);
    CHECK(row.mask == rows[1].mask);
    CHECK(row.metrics.f1->overall == 70.0);
}

TEST_CASE("visualisation helpers") {
    const auto img = torch::full({3, 8, 8}, 0.5);
    auto labels = torch::zeros({8, 8}, torch::kInt64);
    labels.index_put_({torch::indexing::Slice(0, 4)}, 3);
    const auto over = overlay_labels(img, labels, 11);
    CHECK(torch::equal(over.slice(1, 4), img.slice(1, 4)));
    CHECK_FALSE(torch::equal(over.slice(1, 0, 4), img.slice(1, 0, 4)));
    const auto colours = colorize_labels(torch::arange(20).view({4, 5}), 20);
    CHECK(colours.sizes() == torch::IntArrayRef({3, 4, 5}));
    const auto dotted = draw_points(img, {{3, 3}});
    CHECK_FALSE(torch::equal(dotted, img));
    const auto grid = tile_grid({{img, img, img}, {img}});
    CHECK(grid.sizes() == torch::IntArrayRef({3, 16, 24}));
    CHECK(grid.slice(1, 8).slice(2, 8).abs().sum().item<double>() == 0.0);
    CHECK_THROWS_AS(tile_grid({{img, torch::zeros({3, 4, 4})}}), ValidationError);
}

TEST_CASE("ablation runs, reports and resumes") {
    test::TempDir dir("ablation");
    const auto pre = test::untrained_checkpoint();
    const auto train = taskdata::as_segmentation_samples(taskdata::generate_faces(4, 32, 1));
    const auto test_set = taskdata::as_segmentation_samples(taskdata::generate_faces(3, 32, 2));
    AblationConfig cfg;
    cfg.masks = {"10000", "00000"};
    cfg.seeds = {2, 1};
    cfg.adapt = tiny_adapt();
    cfg.previews = 2;
    const auto res = run_ablation(cfg, pre, train, test_set, dir.path());
    REQUIRE(res.rows.size() == 4);
    CHECK(res.rows[0].mask.to_string() == "00000");
    CHECK(res.rows[0].seed == 2);
    CHECK(res.rows[1].seed == 1);
    const AblationLayout layout{dir.path()};
    CHECK(std::filesystem::exists(layout.checkpoint("10000", 1)));
    CHECK(std::filesystem::exists(layout.table()));
    const auto grid = taskdata::read_image(layout.grid(1));
    CHECK(grid.size(2) == 3 * 32);
    CHECK(grid.size(1) == 2 * 32);
    const auto table = test::read_file(layout.table());

    // Resume: nothing is retrained, outputs are identical.
    const auto stamp = std::filesystem::last_write_time(layout.checkpoint("00000", 2));
    cfg.resume = true;
    const auto again = run_ablation(cfg, pre, train, test_set, dir.path());
    CHECK(std::filesystem::last_write_time(layout.checkpoint("00000", 2)) == stamp);
    CHECK(test::read_file(layout.table()) == table);
    REQUIRE(again.rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(again.rows[i].metrics.primary() == res.rows[i].metrics.primary());

    // A missing cell is recomputed on resume.
    std::filesystem::remove(layout.checkpoint("10000", 1));
    const auto healed = run_ablation(cfg, pre, train, test_set, dir.path());
    CHECK(std::filesystem::exists(layout.checkpoint("10000", 1)));
    CHECK(test::read_file(layout.table()) == table);

    // Resume with a different configuration is refused.
    cfg.adapt.max_steps = 3;
    CHECK_THROWS_AS(run_ablation(cfg, pre, train, test_set, dir.path()), ValidationError);
}

TEST_CASE("invalid ablation masks fail before any training") {
    test::TempDir dir("ablation_bad");
    const auto pre = test::untrained_checkpoint();
    const auto train = taskdata::as_segmentation_samples(taskdata::generate_faces(2, 32, 1));
    AblationConfig cfg;
    cfg.adapt = tiny_adapt();
    cfg.masks = {"00000", "1111"};
    CHECK_THROWS_AS(run_ablation(cfg, pre, train, train, dir / "out"), ValidationError);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "checkpoints"));
    cfg.masks = {"00000"};
    CHECK_THROWS_AS(cfg.validate(test::tiny_backbone()), ValidationError);
    cfg.masks = {"00000", "00000"};
    CHECK_THROWS_AS(cfg.validate(test::tiny_backbone()), ValidationError);
    cfg.masks = {"00000", "11111"};
    cfg.seeds = {1, 1};
    CHECK_THROWS_AS(cfg.validate(test::tiny_backbone()), ValidationError);
}
