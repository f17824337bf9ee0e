#include "fsma/evalmetrics/metrics.hpp"

#include "fsma/common/errors.hpp"
#include "fsma/common/json_reader.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fsma::evalmetrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double subset_error(const PointSet& pred, const PointSet& gt, const std::vector<std::int64_t>& idx, double norm) {
    if (idx.empty()) return kNaN;
    double sum = 0.0;
    for (const auto k : idx) sum += distance(pred[k], gt[k]);
    return 100.0 * sum / (norm * static_cast<double>(idx.size()));
}

} // namespace

NmeSpec NmeSpec::ibug68() {
    NmeSpec s;
    s.outline.resize(17);
    std::iota(s.outline.begin(), s.outline.end(), 0);
    s.inside.resize(51);
    std::iota(s.inside.begin(), s.inside.end(), 17);
    return s;
}

void NmeSpec::validate() const {
    if (num_points <= 0) throw ValidationError("nme spec: num_points must be positive");
    if (left_eye == right_eye) throw ValidationError("nme spec: eye indices must differ");
    if (left_eye < 0 || left_eye >= num_points || right_eye < 0 || right_eye >= num_points) {
        throw ValidationError("nme spec: eye index out of range");
    }
    std::vector<int> seen(static_cast<std::size_t>(num_points), 0);
    for (const auto* set : {&inside, &outline}) {
        for (const auto k : *set) {
            if (k < 0 || k >= num_points) throw ValidationError("nme spec: landmark index out of range");
            ++seen[static_cast<std::size_t>(k)];
        }
    }
    for (const auto c : seen) {
        if (c != 1) throw ValidationError("nme spec: inside and outline must partition every landmark exactly once");
    }
}

NmeResult nme(const PointSet& pred, const PointSet& gt, const NmeSpec& spec) {
    spec.validate();
    if (static_cast<std::int64_t>(gt.size()) != spec.num_points || pred.size() != gt.size()) {
        throw ValidationError("nme: expected " + std::to_string(spec.num_points) + " predicted and ground-truth points");
    }
    const double norm = distance(gt[spec.left_eye], gt[spec.right_eye]);
    if (!(norm > 0.0)) throw ValidationError("nme: ground-truth eye corners coincide");
    std::vector<std::int64_t> all(gt.size());
    std::iota(all.begin(), all.end(), 0);
    return {subset_error(pred, gt, spec.inside, norm), subset_error(pred, gt, spec.outline, norm),
            subset_error(pred, gt, all, norm)};
}

NmeResult mean_nme(const std::vector<NmeResult>& results) {
    if (results.empty()) throw ValidationError("mean_nme: no results");
    NmeResult m;
    for (const auto& r : results) {
        m.inside += r.inside;
        m.outline += r.outline;
        m.all += r.all;
    }
    const double n = static_cast<double>(results.size());
    return {m.inside / n, m.outline / n, m.all / n};
}

F1Spec F1Spec::helen11() {
    F1Spec s;
    s.num_classes = 11;
    s.groups = {{"background", {0}}, {"face", {1}},          {"eyebrows", {2, 3}}, {"eyes", {4, 5}},
                {"nose", {6}},       {"mouth", {7, 8, 9}}, {"hair", {10}}};
    s.component_set = {"eyebrows", "eyes", "nose", "mouth"};
    return s;
}

F1Spec F1Spec::per_class(const std::vector<std::string>& class_names, const std::vector<std::string>& components) {
    F1Spec s;
    s.num_classes = static_cast<std::int64_t>(class_names.size());
    for (std::size_t i = 0; i < class_names.size(); ++i) s.groups.push_back({class_names[i], {static_cast<std::int64_t>(i)}});
    s.component_set = components;
    return s;
}

void F1Spec::validate() const {
    if (num_classes < 2) throw ValidationError("f1 spec: num_classes must be >= 2");
    if (groups.empty()) throw ValidationError("f1 spec: no groups");
    std::vector<int> owner(static_cast<std::size_t>(num_classes), 0);
    for (const auto& g : groups) {
        if (g.labels.empty()) throw ValidationError("f1 spec: group '" + g.name + "' has no labels");
        for (const auto l : g.labels) {
            if (l < 0 || l >= num_classes) {
                throw ValidationError("f1 spec: group '" + g.name + "' uses label " + std::to_string(l) +
                                      " outside [0, " + std::to_string(num_classes) + ")");
            }
            if (owner[static_cast<std::size_t>(l)]++ > 0) {
                throw ValidationError("f1 spec: label " + std::to_string(l) + " belongs to more than one group");
            }
        }
    }
    for (const auto& c : component_set) {
        const bool found = std::any_of(groups.begin(), groups.end(), [&](const F1Group& g) { return g.name == c; });
        if (!found) throw ValidationError("f1 spec: component '" + c + "' is not a group");
    }
}

F1Counts& F1Counts::operator+=(const F1Counts& other) {
    if (tp.empty()) {
        *this = other;
        return *this;
    }
    if (other.tp.size() != tp.size()) throw ValidationError("F1Counts: group count mismatch");
    for (std::size_t i = 0; i < tp.size(); ++i) {
        tp[i] += other.tp[i];
        fp[i] += other.fp[i];
        fn[i] += other.fn[i];
    }
    return *this;
}

F1Counts f1_counts(const torch::Tensor& pred, const torch::Tensor& gt, const F1Spec& spec) {
    spec.validate();
    if (pred.dim() != 2 || !pred.sizes().equals(gt.sizes())) throw ValidationError("seg_f1: masks must be equal-size H x W");
    const auto p = pred.to(torch::kInt64).contiguous();
    const auto g = gt.to(torch::kInt64).contiguous();
    for (const auto* t : {&p, &g}) {
        if (t->numel() > 0 && (t->min().item<std::int64_t>() < 0 || t->max().item<std::int64_t>() >= spec.num_classes)) {
            throw ValidationError("seg_f1: mask value outside [0, " + std::to_string(spec.num_classes) + ")");
        }
    }
    // Confusion matrix over raw labels, then fold into groups.
    const auto k = spec.num_classes;
    const auto cm = torch::bincount((g * k + p).flatten(), {}, k * k).view({k, k});
    const auto acc = cm.accessor<std::int64_t, 2>();
    F1Counts c;
    const auto n = spec.groups.size();
    c.tp.assign(n, 0);
    c.fp.assign(n, 0);
    c.fn.assign(n, 0);
    for (std::size_t gi = 0; gi < n; ++gi) {
        std::vector<bool> in(static_cast<std::size_t>(k), false);
        for (const auto l : spec.groups[gi].labels) in[static_cast<std::size_t>(l)] = true;
        for (std::int64_t t = 0; t < k; ++t) {
            for (std::int64_t q = 0; q < k; ++q) {
                const auto v = acc[t][q];
                if (in[t] && in[q]) c.tp[gi] += v;
                else if (in[q]) c.fp[gi] += v;
                else if (in[t]) c.fn[gi] += v;
            }
        }
    }
    return c;
}

F1Report f1_from_counts(const F1Counts& counts, const F1Spec& spec) {
    spec.validate();
    if (counts.tp.size() != spec.groups.size()) throw ValidationError("f1_from_counts: counts do not match the spec");
    F1Report r;
    double sum = 0.0;
    int defined = 0;
    for (std::size_t i = 0; i < spec.groups.size(); ++i) {
        r.names.push_back(spec.groups[i].name);
        const auto denom = 2 * counts.tp[i] + counts.fp[i] + counts.fn[i];
        if (denom == 0) {
            r.f1.emplace_back(std::nullopt);
            continue;
        }
        const double f = 100.0 * static_cast<double>(2 * counts.tp[i]) / static_cast<double>(denom);
        r.f1.emplace_back(f);
        if (std::find(spec.component_set.begin(), spec.component_set.end(), spec.groups[i].name) !=
            spec.component_set.end()) {
            sum += f;
            ++defined;
        }
    }
    r.overall = defined > 0 ? sum / defined : kNaN;
    return r;
}

F1Report seg_f1(const torch::Tensor& pred, const torch::Tensor& gt, const F1Spec& spec) {
    return f1_from_counts(f1_counts(pred, gt, spec), spec);
}

std::optional<double> F1Report::get(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return f1[i];
    }
    return std::nullopt;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace

nlohmann::json to_json(const NmeResult& r) {
    return {{"inside", number_or_null(r.inside)}, {"outline", number_or_null(r.outline)}, {"all", number_or_null(r.all)}};
}

nlohmann::json to_json(const F1Report& r) {
    auto per = nlohmann::json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) per[r.names[i]] = r.f1[i] ? nlohmann::json(*r.f1[i]) : nlohmann::json(nullptr);
    // JSON objects do not keep key order; "classes" records the report order.
    return {{"classes", r.names}, {"per_class", per}, {"overall", number_or_null(r.overall)}};
}

nlohmann::json to_json(const NmeSpec& s) {
    return {{"num_points", s.num_points}, {"left_eye", s.left_eye}, {"right_eye", s.right_eye},
            {"inside", s.inside},         {"outline", s.outline}};
}

nlohmann::json to_json(const F1Spec& s) {
    auto groups = nlohmann::json::array();
    for (const auto& g : s.groups) groups.push_back({{"name", g.name}, {"labels", g.labels}});
    return {{"num_classes", s.num_classes}, {"groups", groups}, {"components", s.component_set}};
}

NmeSpec nme_spec_from_json(const nlohmann::json& j) {
    NmeSpec s;
    JsonReader r(j, "nme");
    r.read("num_points", s.num_points);
    r.read("left_eye", s.left_eye);
    r.read("right_eye", s.right_eye);
    r.read("inside", s.inside);
    r.read("outline", s.outline);
    r.finish();
    s.validate();
    return s;
}

F1Spec f1_spec_from_json(const nlohmann::json& j) {
    F1Spec s;
    JsonReader r(j, "f1");
    r.read("num_classes", s.num_classes);
    const auto& groups = r.raw("groups");
    if (!groups.is_array()) throw ValidationError("f1.groups: expected an array");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        JsonReader g(groups[i], "f1.groups[" + std::to_string(i) + "]");
        F1Group group;
        group.name = g.require<std::string>("name");
        group.labels = g.require<std::vector<std::int64_t>>("labels");
        g.finish();
        s.groups.push_back(group);
    }
    r.read("components", s.component_set);
    r.finish();
    s.validate();
    return s;
}

} // namespace fsma::evalmetrics
