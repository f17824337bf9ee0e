#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

namespace fsma::trainer {

/// Append-only per-step log: "step=<n> <fields> lr=<lr> wall=<seconds>".
///
/// In deterministic mode the wall-time column moves to a "<log>.timing"
/// sidecar so reruns produce byte-identical logs. An empty path disables output.
class TrainingLog {
public:
    TrainingLog() = default;
    TrainingLog(const std::filesystem::path& path, bool deterministic);

    void record(std::int64_t step, const std::string& fields, double lr);
    void note(const std::string& line);  // "# ..." comment line

    bool enabled() const { return main_.is_open(); }

private:
    std::ofstream main_;
    std::ofstream timing_;
    bool deterministic_ = true;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// "%.9g" formatting shared by log writers.
std::string fmt_num(double value);

} // namespace fsma::trainer
