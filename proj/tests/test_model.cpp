#include "support.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/model/bundle.hpp"
#include "fsma/model/checkpoint.hpp"
#include "fsma/model/skip_mask.hpp"

#include "doctest_torch.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

using namespace fsma;
using namespace fsma::model;

namespace {

const TaskSpec kSeg = TaskSpec::make(TaskKind::segmentation, 11);
const TaskSpec kLandmarks = TaskSpec::make(TaskKind::landmarks, 68);

ModelBundle adapted(const std::string& mask, const TaskSpec& task = kSeg, const BackboneConfig& cfg = test::tiny_backbone()) {
    auto base = build_autoencoder(cfg, 3);
    const auto levels = static_cast<std::size_t>(task.decoder_levels(cfg.num_scales));
    return attach_head(std::move(base), task, SkipMask::parse(mask, levels), 9);
}

/// Hand count for one skip layer: two bias-free 3x3 convs C->C plus two affine norms.
std::int64_t skip_layer_params(std::int64_t c) { return 2 * (c * c * 9) + 2 * (2 * c); }

} // namespace

TEST_CASE("skip masks parse, count and order") {
    const auto m = SkipMask::parse("11010", 5);
    CHECK(m.popcount() == 3);
    CHECK(m.to_string() == "11010");
    CHECK(m.enabled_strides(5) == std::vector<std::int64_t>{32, 16, 4});
    CHECK(SkipMask::stride_of(0, 5) == 32);
    CHECK(SkipMask::stride_of(4, 5) == 2);
    CHECK_THROWS_AS(SkipMask::parse("1101", 5), ValidationError);
    CHECK_THROWS_AS(SkipMask::parse("11020", 5), ValidationError);
    CHECK_THROWS_AS(SkipMask::parse("", 5), ValidationError);

    std::vector<SkipMask> masks;
    for (const char* s : {"11111", "10000", "00000", "01000", "11000", "00011"}) masks.push_back(SkipMask::parse(s, 5));
    std::sort(masks.begin(), masks.end(), ablation_order);
    std::vector<std::string> order;
    for (const auto& x : masks) order.push_back(x.to_string());
    CHECK(order == std::vector<std::string>{"00000", "01000", "10000", "00011", "11000", "11111"});
}

TEST_CASE("popcount of the mask equals the number of instantiated skip layers") {
    for (const char* s : {"00000", "10000", "01100", "11100", "10101", "11111"}) {
        const auto model = adapted(s);
        const auto report = param_partition_report(model);
        CHECK(report.skip_groups == SkipMask::parse(s, 5).popcount());
        CHECK(model.network()->skip->size() == SkipMask::parse(s, 5).popcount());
    }
}

TEST_CASE("trainable delta between 10000 and 00000 is one stride-32 skip layer") {
    const auto cfg = test::tiny_backbone();
    const auto zero = param_partition_report(adapted("00000"));
    const auto one = param_partition_report(adapted("10000"));
    const auto c = cfg.width_at(5);
    CHECK(one.trainable_count - zero.trainable_count == skip_layer_params(c));
    CHECK(one.frozen_count == zero.frozen_count);
    const auto* g = one.group("skip.s32");
    REQUIRE(g != nullptr);
    CHECK(g->count == skip_layer_params(c));

    // Default toy widths: 128 channels at stride 32.
    const auto toy = BackboneConfig::toy();
    CHECK(toy.width_at(5) == 128);
    const auto a = param_partition_report(adapted("10000", kSeg, toy));
    const auto b = param_partition_report(adapted("00000", kSeg, toy));
    CHECK(a.trainable_count - b.trainable_count == 295424);
}

TEST_CASE("landmark heads take four digits and emit K maps at half resolution") {
    CHECK_THROWS_AS(adapted("11111", kLandmarks), ValidationError);
    CHECK_THROWS_AS(adapted("111", kLandmarks), ValidationError);
    CHECK_THROWS_AS(adapted("1111", kSeg), ValidationError);
    const auto model = adapted("1111", kLandmarks);
    torch::NoGradGuard g;
    const auto out = forward_task(model, torch::rand({2, 3, 32, 32}));
    CHECK(out.sizes() == torch::IntArrayRef({2, 68, 16, 16}));
    const auto seg = forward_task(adapted("00000"), torch::rand({1, 3, 32, 32}));
    CHECK(seg.sizes() == torch::IntArrayRef({1, 11, 32, 32}));
}

TEST_CASE("all-zeros model reads encoder features only through z") {
    torch::manual_seed(0);
    const auto x = torch::rand({2, 3, 32, 32});
    for (const char* s : {"00000", "10000", "00001"}) {
        auto model = adapted(s);
        torch::NoGradGuard g;
        // Segmentation heads start at zero; give this one a non-degenerate response.
        model.network()->head->weight.normal_(0.0, 0.1);
        auto encoded = model.encode(x);
        ForwardTrace trace;
        const auto base = model.decode(encoded, &trace);
        CHECK(trace.pyramid_strides_read == SkipMask::parse(s, 5).enabled_strides(5));

        // Replace every pyramid feature: output must not move unless a skip reads it.
        EncoderOutput perturbed{{}, encoded.z};
        for (const auto& f : encoded.pyramid) perturbed.pyramid.push_back(f + torch::randn_like(f));
        const auto moved = model.decode(perturbed);
        if (std::string(s) == "00000") CHECK(torch::equal(base, moved));
        else CHECK_FALSE(torch::equal(base, moved));
    }

    // Autograd view of the same property: no gradient path from pyramid features to the output.
    const auto model = adapted("00000");
    auto encoded = model.encode(x);
    EncoderOutput detached{{}, encoded.z.detach()};
    std::vector<torch::Tensor> leaves;
    for (const auto& f : encoded.pyramid) {
        leaves.push_back(f.detach().requires_grad_(true));
        detached.pyramid.push_back(leaves.back());
    }
    const auto out = model.decode(detached);
    const auto grads = torch::autograd::grad({out.sum()}, leaves, {}, false, false, true);
    for (const auto& gr : grads) CHECK_FALSE(gr.defined());
}

TEST_CASE("attach_head freezes the backbone and keeps frozen counts") {
    const auto cfg = test::tiny_backbone();
    auto base = build_autoencoder(cfg, 3);
    const auto before = param_partition_report(base);
    CHECK(before.frozen_count == 0);
    const auto model = adapted("11111");
    const auto after = param_partition_report(model);
    CHECK(after.frozen_count == before.total);
    for (const auto& [name, t] : model.named_parameters()) {
        CHECK(t.requires_grad() == !is_backbone_group(parameter_group(name)));
    }
    CHECK(parameter_group("skip.s16.body.0.weight") == "skip.s16");
    CHECK(parameter_group("encoder.stem_conv.weight") == "encoder");
    CHECK(parameter_group("itl.0.weight") == "itl");
    CHECK(is_backbone_group("decoder"));
    CHECK_FALSE(is_backbone_group("skip.s32"));
}

TEST_CASE("untrained adapted model reproduces the pretrained decoder path") {
    // Identity ITLs: with mask 00000, features entering the head equal the decoder's.
    auto base = build_autoencoder(test::tiny_backbone(), 3);
    base.set_training(false);
    torch::NoGradGuard g;
    const auto x = torch::rand({1, 3, 32, 32});
    const auto recon = base.reconstruct(x);
    auto img = attach_head(std::move(base), TaskSpec::make(TaskKind::shadow_removal, 3), SkipMask::none(5), 1);
    CHECK(torch::allclose(forward_task(img, x), recon, 1e-5, 1e-6));
}

TEST_CASE("build_autoencoder is deterministic in (cfg, seed)") {
    const auto a = build_autoencoder(test::tiny_backbone(), 11);
    const auto b = build_autoencoder(test::tiny_backbone(), 11);
    const auto c = build_autoencoder(test::tiny_backbone(), 12);
    CHECK(state_checksum(a.named_state()) == state_checksum(b.named_state()));
    CHECK(state_checksum(a.named_state()) != state_checksum(c.named_state()));
}

TEST_CASE("checkpoint save, load and forward are bit-identical") {
    test::TempDir dir("ckpt");
    auto model = adapted("10100");
    {
        // Move normalisation statistics away from their defaults.
        model.set_training(true);
        torch::NoGradGuard g;
        forward_task(model, torch::rand({2, 3, 32, 32}));
        model.set_training(false);
    }
    auto ckpt = make_checkpoint(model, "adapt", 42);
    ckpt.manifest.extra["note"] = "round trip";
    save_checkpoint(dir / "m.ckpt", ckpt);
    CHECK(std::distance(std::filesystem::directory_iterator(dir.path()), std::filesystem::directory_iterator{}) == 1);
    const auto loaded = load_checkpoint(dir / "m.ckpt");
    CHECK(loaded.manifest.mask == "10100");
    CHECK(loaded.manifest.task.has_value());
    CHECK(*loaded.manifest.task == kSeg);
    CHECK(loaded.manifest.step == 42);
    CHECK(loaded.manifest.extra["note"] == "round trip");
    REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        CHECK(loaded.tensors[i].first == ckpt.tensors[i].first);
        CHECK(test::bit_equal(loaded.tensors[i].second, ckpt.tensors[i].second));
    }
    const auto restored = restore_bundle(loaded);
    torch::NoGradGuard g;
    const auto x = torch::rand({3, 3, 32, 32});
    CHECK(torch::equal(forward_task(model, x), forward_task(restored, x)));

    // Second save of the same state is byte-identical.
    save_checkpoint(dir / "n.ckpt", make_checkpoint(restored, "adapt", 42));
    auto again = load_checkpoint(dir / "n.ckpt");
    again.manifest.extra = ckpt.manifest.extra;
    save_checkpoint(dir / "n.ckpt", again);
    CHECK(test::read_file(dir / "m.ckpt") == test::read_file(dir / "n.ckpt"));
}

TEST_CASE("corrupt or truncated checkpoints are rejected") {
    test::TempDir dir("ckpt_bad");
    save_checkpoint(dir / "m.ckpt", test::untrained_checkpoint());
    auto bytes = test::read_file(dir / "m.ckpt");
    {
        auto flipped = bytes;
        flipped[flipped.size() / 2] ^= 0x5A;
        std::ofstream(dir / "flip.ckpt", std::ios::binary) << flipped;
    }
    std::ofstream(dir / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 3);
    std::ofstream(dir / "magic.ckpt", std::ios::binary) << "NOTACKPT";
    CHECK_THROWS(load_checkpoint(dir / "flip.ckpt"));
    CHECK_THROWS(load_checkpoint(dir / "short.ckpt"));
    CHECK_THROWS(load_checkpoint(dir / "magic.ckpt"));
    CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
}

TEST_CASE("task specs validate") {
    CHECK(kLandmarks.resolution == OutputResolution::half);
    CHECK(kSeg.resolution == OutputResolution::full);
    CHECK(kLandmarks.decoder_levels(5) == 4);
    CHECK_THROWS_AS(TaskSpec::make(TaskKind::segmentation, 1).validate(), ValidationError);
    CHECK_THROWS_AS(task_from_json({{"kind", "segmentation"}, {"out_channels", 4}, {"colour", 1}}), ValidationError);
    CHECK(task_from_json(to_json(kLandmarks)) == kLandmarks);
    CHECK_THROWS_AS(parse_task_kind("depth"), ValidationError);
}
