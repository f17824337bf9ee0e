#include "fsma/trainer/pretrain.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/rng.hpp"
#include "fsma/objectives/ssim.hpp"
#include "fsma/taskdata/image_io.hpp"
#include "fsma/trainer/augment.hpp"
#include "fsma/trainer/training_log.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace fsma::trainer {

using namespace objectives;

namespace {

constexpr std::uint64_t kStreamOrder = 1;
constexpr std::uint64_t kStreamAugment = 2;
constexpr std::uint64_t kStreamPrior = 3;
constexpr std::uint64_t kStreamDiscImage = 4;
constexpr std::uint64_t kStreamDiscLatent = 5;

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    return order;
}

torch::optim::AdamOptions adam_options(const OptimizerConfig& o) {
    return torch::optim::AdamOptions(o.lr).betas({o.beta1, o.beta2}).amsgrad(o.amsgrad);
}

} // namespace

void set_learning_rate(torch::optim::Adam& opt, double lr) {
    for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::int64_t batch_size) {
    const auto b = static_cast<std::size_t>(std::max<std::int64_t>(batch_size, 1));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t begin = 0; begin < n; begin += b) out.emplace_back(begin, std::min(n, begin + b));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out.pop_back();
        out.back().second = n;
    }
    return out;
}

std::int64_t planned_steps(std::size_t n, std::int64_t batch_size, std::int64_t epochs, std::int64_t max_steps) {
    const auto per_epoch = static_cast<std::int64_t>(batch_ranges(n, batch_size).size());
    std::int64_t total = std::numeric_limits<std::int64_t>::max();
    if (epochs > 0 && per_epoch <= total / epochs) total = per_epoch * epochs;
    if (max_steps > 0) total = std::min(total, max_steps);
    return total;
}

void configure_threads(bool deterministic) {
    if (deterministic) at::set_num_threads(1);
}

torch::Tensor stack_images(const taskdata::SampleSet& samples) {
    std::vector<torch::Tensor> images;
    images.reserve(samples.size());
    for (const auto& s : samples) images.push_back(s.image);
    return torch::stack(images);
}

PretrainResult run_pretrain(const PretrainConfig& cfg, const taskdata::SampleSet& dataset,
                            const PretrainOutputs& outputs) {
    cfg.validate();
    if (dataset.size() < 2) throw ValidationError("pretrain: need at least 2 images, got " + std::to_string(dataset.size()));
    for (const auto& s : dataset) {
        if (s.image.dim() != 3 || s.image.size(0) != 3) throw ValidationError("pretrain: sample '" + s.id + "' is not RGB");
    }
    if (!outputs.checkpoint.empty()) {
        const auto dir = outputs.checkpoint.parent_path();
        if (!dir.empty()) std::filesystem::create_directories(dir);
    }
    configure_threads(cfg.deterministic);

    auto model = model::build_autoencoder(cfg.backbone.with_input_size(cfg.phases.front().resolution), cfg.seed);
    torch::manual_seed(derive_seed(cfg.seed, kStreamDiscImage));
    auto disc_img = std::make_shared<ImageDiscriminator>(cfg.image_disc);
    torch::manual_seed(derive_seed(cfg.seed, kStreamDiscLatent));
    auto disc_lat = std::make_shared<LatentDiscriminator>(cfg.backbone.latent_dim, cfg.latent_hidden);
    const auto prior = standard_normal_prior(derive_seed(cfg.seed, kStreamPrior));

    torch::optim::Adam gen_opt(model.trainable_parameters(), adam_options(cfg.optimizer));
    std::vector<torch::Tensor> disc_params = disc_img->parameters();
    for (const auto& p : disc_lat->parameters()) disc_params.push_back(p);
    torch::optim::Adam disc_opt(disc_params, adam_options(cfg.optimizer));

    TrainingLog log(outputs.log, cfg.deterministic);
    log.note("pretrain seed=" + std::to_string(cfg.seed) + " images=" + std::to_string(dataset.size()));

    Rng order_rng(derive_seed(cfg.seed, kStreamOrder));
    Rng aug_rng(derive_seed(cfg.seed, kStreamAugment));
    PretrainResult result{std::move(model), {}, {}};
    auto& net = result.model;
    std::int64_t step = 0;

    for (std::size_t phase = 0; phase < cfg.phases.size(); ++phase) {
        const auto& ph = cfg.phases[phase];
        net.set_input_size(ph.resolution);
        net.set_training(true);
        disc_img->train();
        disc_lat->train();
        taskdata::SampleSet resized = dataset;
        for (auto& s : resized) s.image = taskdata::resize_image(s.image, ph.resolution, ph.resolution);

        std::int64_t phase_steps = 0;
        const auto phase_total = planned_steps(resized.size(), ph.batch_size, ph.epochs, ph.max_steps);
        bool done = false;
        for (std::int64_t epoch = 0; epoch < ph.epochs && !done; ++epoch) {
            const auto order = shuffled(resized.size(), order_rng);
            for (const auto& [begin, end] : batch_ranges(order.size(), ph.batch_size)) {
                taskdata::SampleSet batch_samples;
                for (auto i = begin; i < end; ++i) batch_samples.push_back(augment(resized[order[i]], cfg.augment, aug_rng));
                const auto x = stack_images(batch_samples);
                const auto lr = scheduled_lr(cfg.optimizer, phase_steps, phase_total);
                set_learning_rate(gen_opt, lr);
                set_learning_rate(disc_opt, lr);

                const auto encoded = net.encode(x);
                const auto xhat = net.decode(encoded);
                const auto& z = encoded.z;

                // Discriminator step.
                disc_opt.zero_grad();
                const auto d_img = discriminator_loss(*disc_img, x, xhat);
                const auto d_lat = discriminator_loss(*disc_lat, prior(z.sizes()).to(z.dtype()), z);
                (d_img + d_lat).backward();
                disc_opt.step();

                // Generator step against the updated discriminators.
                gen_opt.zero_grad();
                const auto rec = l1_rec(x, xhat);
                const auto adv = generator_loss(*disc_img, xhat);
                const auto enc = generator_loss(*disc_lat, z);
                const auto ssim_value = ssim(x, xhat, cfg.ssim);
                const auto total = unsup_total(cfg.weights, rec, adv, enc, ssim_value);
                total.backward();
                gen_opt.step();

                PretrainStep rec_step;
                rec_step.step = step;
                rec_step.phase = static_cast<std::int64_t>(phase);
                rec_step.report = unsup_objective(cfg.weights, {rec.item<double>(), adv.item<double>(),
                                                                enc.item<double>(), ssim_value.item<double>()});
                rec_step.d_image = d_img.item<double>();
                rec_step.d_latent = d_lat.item<double>();
                log.record(step,
                           "phase=" + std::to_string(phase) + " res=" + std::to_string(ph.resolution) + " " +
                               rec_step.report.to_log_line() + " d_img=" + fmt_num(rec_step.d_image) +
                               " d_lat=" + fmt_num(rec_step.d_latent),
                           lr);
                result.history.push_back(rec_step);
                ++step;
                ++phase_steps;
                if (ph.max_steps > 0 && phase_steps >= ph.max_steps) {
                    done = true;
                    break;
                }
            }
        }
    }

    net.set_training(false);
    result.checkpoint = model::make_checkpoint(net, "pretrain", step);
    result.checkpoint.manifest.extra["config"] = to_json(cfg);
    model::append_module_state(result.checkpoint, "disc_img", *disc_img);
    model::append_module_state(result.checkpoint, "disc_lat", *disc_lat);
    if (!outputs.checkpoint.empty()) model::save_checkpoint(outputs.checkpoint, result.checkpoint);
    return result;
}

} // namespace fsma::trainer
