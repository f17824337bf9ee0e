#include "fsma/model/bundle.hpp"

#include "fsma/common/errors.hpp"

#include <map>

namespace fsma::model {

namespace {

std::string skip_key(std::int64_t stride) { return "s" + std::to_string(stride); }

void require_batch(const torch::Tensor& batch, std::int64_t size) {
    if (batch.dim() != 4 || batch.size(1) != 3) {
        throw ValidationError("forward: expected an N x 3 x H x W batch, got " + std::to_string(batch.dim()) + "-d tensor");
    }
    if (batch.size(2) != size || batch.size(3) != size) {
        throw ValidationError("forward: batch resolution " + std::to_string(batch.size(2)) + "x" +
                              std::to_string(batch.size(3)) + " does not match configured input size " +
                              std::to_string(size));
    }
}

} // namespace

NetworkImpl::NetworkImpl(const BackboneConfig& cfg) {
    encoder = register_module("encoder", Encoder(cfg));
    decoder = register_module("decoder", Decoder(cfg));
}

ModelBundle::ModelBundle(const BackboneConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    torch::manual_seed(seed);
    net_ = Network(cfg_);
    mask_ = SkipMask::none(static_cast<std::size_t>(cfg_.num_scales));
}

TaskSpec ModelBundle::effective_task() const { return task_ ? *task_ : TaskSpec::make(TaskKind::reconstruction, 3); }

EncoderOutput ModelBundle::encode(const torch::Tensor& batch) const {
    require_batch(batch, cfg_.input_size);
    return net_->encoder->forward(batch);
}

torch::Tensor ModelBundle::decode(const EncoderOutput& encoded, ForwardTrace* trace) const {
    const auto scales = cfg_.num_scales;
    const auto task = effective_task();
    const auto levels = task.decoder_levels(scales);
    auto& decoder = net_->decoder;

    auto h = decoder->project(encoded.z, cfg_.input_size >> scales);
    for (std::int64_t level = 0; level < levels; ++level) {
        h = decoder->block(level, h);
        if (task_) {
            if (mask_.enabled(static_cast<std::size_t>(level))) {
                const auto stride = SkipMask::stride_of(static_cast<std::size_t>(level), scales);
                const auto& feature = encoded.pyramid.at(static_cast<std::size_t>(scales - 1 - level));
                h = h + net_->skip[skip_key(stride)]->as<SkipLayer>()->forward(feature);
                if (trace) trace->pyramid_strides_read.push_back(stride);
            }
            h = net_->itl[level]->as<torch::nn::Conv2d>()->forward(h);
        }
        h = decoder->upsample(level, h);
    }
    if (!task_) return decoder->output(h);
    auto out = net_->head->forward(h);
    return is_image_task(task_->kind) ? image_activation(out) : out;
}

torch::Tensor ModelBundle::forward(const torch::Tensor& batch, ForwardTrace* trace) const {
    return decode(encode(batch), trace);
}

torch::Tensor ModelBundle::reconstruct(const torch::Tensor& batch) const {
    require_batch(batch, cfg_.input_size);
    auto encoded = net_->encoder->forward(batch);
    auto& decoder = net_->decoder;
    auto h = decoder->project(encoded.z, cfg_.input_size >> cfg_.num_scales);
    for (std::int64_t level = 0; level < cfg_.num_scales; ++level) {
        h = decoder->upsample(level, decoder->block(level, h));
    }
    return decoder->output(h);
}

void ModelBundle::set_training(bool on) {
    net_->train(on);
    if (task_) {
        net_->encoder->eval();
        net_->decoder->eval();
    }
}

void ModelBundle::set_input_size(std::int64_t size) {
    auto cfg = cfg_.with_input_size(size);
    cfg.validate();
    cfg_ = cfg;
}

std::vector<torch::Tensor> ModelBundle::trainable_parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& p : net_->parameters()) {
        if (p.requires_grad()) out.push_back(p);
    }
    return out;
}

std::vector<NamedTensor> ModelBundle::named_parameters() const {
    std::vector<NamedTensor> out;
    for (const auto& item : net_->named_parameters()) out.emplace_back(item.key(), item.value());
    return out;
}

std::vector<NamedTensor> ModelBundle::named_state() const {
    auto out = named_parameters();
    for (const auto& item : net_->named_buffers()) out.emplace_back(item.key(), item.value());
    return out;
}

void ModelBundle::load_state(const std::vector<NamedTensor>& state) {
    std::map<std::string, torch::Tensor> given(state.begin(), state.end());
    torch::NoGradGuard no_grad;
    std::size_t matched = 0;
    for (auto& [name, tensor] : named_state()) {
        auto it = given.find(name);
        if (it == given.end()) throw ValidationError("load_state: missing tensor '" + name + "'");
        if (it->second.sizes() != tensor.sizes()) throw ValidationError("load_state: shape mismatch for '" + name + "'");
        tensor.copy_(it->second);
        ++matched;
    }
    if (matched != given.size()) throw ValidationError("load_state: state contains tensors unknown to this architecture");
}

ModelBundle build_autoencoder(const BackboneConfig& cfg, std::uint64_t seed) { return ModelBundle(cfg, seed); }

ModelBundle attach_head(ModelBundle model, const TaskSpec& task, const SkipMask& mask, std::uint64_t seed,
                        SkipNorm skip_norm) {
    task.validate();
    if (model.task_) throw ValidationError("attach_head: model already carries a task head");
    const auto scales = model.cfg_.num_scales;
    const auto levels = task.decoder_levels(scales);
    if (static_cast<std::int64_t>(mask.size()) != levels) {
        throw ValidationError("attach_head: " + to_string(task.kind) + " takes a " + std::to_string(levels) +
                              "-digit skip mask, got '" + mask.to_string() + "'");
    }

    auto& net = model.net_;
    for (auto& p : net->encoder->parameters()) p.requires_grad_(false);
    for (auto& p : net->decoder->parameters()) p.requires_grad_(false);

    torch::manual_seed(seed);
    auto& decoder = net->decoder;
    net->itl = net->register_module("itl", torch::nn::ModuleList());
    for (std::int64_t level = 0; level < levels; ++level) {
        const auto w = decoder->width_before_upsample(level);
        torch::nn::Conv2d itl(torch::nn::Conv2dOptions(w, w, 3).padding(1));
        // Identity start: the pretrained decoder path is reproduced before the first update.
        {
            torch::NoGradGuard no_grad;
            torch::nn::init::dirac_(itl->weight);
            itl->bias.zero_();
        }
        net->itl->push_back(itl);
    }
    net->skip = net->register_module("skip", torch::nn::ModuleDict());
    for (std::size_t level = 0; level < mask.size(); ++level) {
        if (!mask.enabled(level)) continue;
        const auto stride = SkipMask::stride_of(level, scales);
        const auto exponent = scales - static_cast<std::int64_t>(level);
        const auto width = model.cfg_.width_at(exponent);
        net->skip->update(std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>{
            {skip_key(stride), SkipLayer(width, width, skip_norm).ptr()}});
    }
    const auto head_in = decoder->width_after_upsample(levels - 1);
    net->head = net->register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(head_in, task.out_channels, 3).padding(1)));
    {
        // Image heads start as the pretrained output layer, so the untrained
        // model reproduces its reconstruction; heatmap and label heads start
        // at zero output.
        torch::NoGradGuard no_grad;
        auto& head = net->head;
        const auto& out = decoder->output_conv;
        if (is_image_task(task.kind) && head->weight.sizes() == out->weight.sizes()) {
            head->weight.copy_(out->weight);
            head->bias.copy_(out->bias);
        } else {
            head->weight.zero_();
            head->bias.zero_();
        }
    }

    model.task_ = task;
    model.mask_ = mask;
    model.skip_norm_ = skip_norm;
    model.head_seed_ = seed;
    model.set_training(false);
    return model;
}

torch::Tensor forward_task(const ModelBundle& model, const torch::Tensor& batch) {
    if (!model.adapted()) throw ValidationError("forward_task: no task head attached");
    return model.forward(batch);
}

const ParamGroupCount* PartitionReport::group(const std::string& name) const {
    for (const auto& g : groups) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

std::string parameter_group(const std::string& name) {
    const auto dot = name.find('.');
    const auto top = name.substr(0, dot);
    if (top == "skip" && dot != std::string::npos) {
        const auto next = name.find('.', dot + 1);
        return name.substr(0, next);
    }
    return top;
}

bool is_backbone_group(const std::string& group) { return group == "encoder" || group == "decoder"; }

PartitionReport param_partition_report(const ModelBundle& model) {
    PartitionReport report;
    for (const auto& [name, tensor] : model.named_parameters()) {
        const auto group = parameter_group(name);
        const bool frozen = !tensor.requires_grad();
        const auto n = tensor.numel();
        (frozen ? report.frozen_count : report.trainable_count) += n;
        report.total += n;
        auto it = std::find_if(report.groups.begin(), report.groups.end(), [&](const auto& g) { return g.name == group; });
        if (it == report.groups.end()) {
            report.groups.push_back({group, n, frozen});
            if (group.rfind("skip.", 0) == 0) ++report.skip_groups;
        } else {
            it->count += n;
            it->frozen = it->frozen && frozen;
        }
    }
    return report;
}

std::uint64_t state_checksum(const std::vector<NamedTensor>& state) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const unsigned char* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= data[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& [name, tensor] : state) {
        mix(reinterpret_cast<const unsigned char*>(name.data()), name.size());
        auto t = tensor.detach().contiguous().cpu();
        mix(static_cast<const unsigned char*>(t.data_ptr()), static_cast<std::size_t>(t.nbytes()));
    }
    return h;
}

} // namespace fsma::model
