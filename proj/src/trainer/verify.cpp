#include "fsma/trainer/verify.hpp"

#include "fsma/common/errors.hpp"

#include <algorithm>
#include <map>

namespace fsma::trainer {

const GroupDelta* FrozenReport::group(const std::string& name) const {
    for (const auto& g : groups) {
        if (g.group == name) return &g;
    }
    return nullptr;
}

FrozenReport verify_frozen(const model::Checkpoint& before, const model::Checkpoint& after) {
    if (!before.manifest.backbone.same_architecture(after.manifest.backbone)) {
        throw ValidationError("verify_frozen: checkpoints have different backbone architectures");
    }
    std::map<std::string, torch::Tensor> old_state;
    for (auto& [name, t] : before.with_prefix("net")) old_state.emplace(name, t);

    std::map<std::string, GroupDelta> groups;
    std::vector<std::string> added;
    for (const auto& [name, t] : after.with_prefix("net")) {
        const auto group = model::parameter_group(name);
        const auto it = old_state.find(name);
        if (it == old_state.end()) {
            if (std::find(added.begin(), added.end(), group) == added.end()) added.push_back(group);
            continue;
        }
        if (!it->second.sizes().equals(t.sizes())) {
            throw ValidationError("verify_frozen: tensor '" + name + "' changed shape");
        }
        const double delta =
            t.numel() == 0 ? 0.0 : (t.to(torch::kFloat64) - it->second.to(torch::kFloat64)).abs().max().item<double>();
        auto& g = groups[group];
        g.group = group;
        g.backbone = model::is_backbone_group(group);
        g.max_abs = std::max(g.max_abs, delta);
    }
    FrozenReport report;
    for (auto& [_, g] : groups) {
        if (g.backbone) report.backbone_max = std::max(report.backbone_max, g.max_abs);
        report.groups.push_back(g);
    }
    report.added = std::move(added);
    report.pass = report.backbone_max == 0.0;
    return report;
}

} // namespace fsma::trainer
