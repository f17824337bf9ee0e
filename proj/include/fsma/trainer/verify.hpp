#pragma once

#include "fsma/model/checkpoint.hpp"

#include <string>
#include <vector>

namespace fsma::trainer {

struct GroupDelta {
    std::string group;
    double max_abs = 0.0;
    bool backbone = false;
};

struct FrozenReport {
    std::vector<GroupDelta> groups;       // tensors present in both checkpoints
    std::vector<std::string> added;       // groups only in `after` (e.g. a new head)
    double backbone_max = 0.0;
    bool pass = true;                     // backbone_max == 0 exactly

    const GroupDelta* group(const std::string& name) const;
};

/// Per-group max |after - before| over network tensors (parameters and
/// normalisation statistics). Throws ValidationError when the backbones differ
/// in architecture or a shared tensor changed shape.
FrozenReport verify_frozen(const model::Checkpoint& before, const model::Checkpoint& after);

} // namespace fsma::trainer
