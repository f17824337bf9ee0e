#pragma once

#include <string>
#include <vector>

namespace fsma::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Entry point shared by the fsma tool and the tests. `args` excludes the
/// program name. Returns 0 on success, 2 on invalid input or configuration,
/// 3 when training or I/O fails.
int run(const std::vector<std::string>& args);

} // namespace fsma::cli
