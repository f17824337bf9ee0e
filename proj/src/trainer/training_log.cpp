#include "fsma/trainer/training_log.hpp"

#include "fsma/common/errors.hpp"

#include <cstdio>

namespace fsma::trainer {

std::string fmt_num(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

TrainingLog::TrainingLog(const std::filesystem::path& path, bool deterministic) : deterministic_(deterministic) {
    if (path.empty()) return;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    main_.open(path, std::ios::binary | std::ios::trunc);
    if (!main_) throw RuntimeError("cannot open training log '" + path.string() + "'");
    if (deterministic_) {
        timing_.open(path.string() + ".timing", std::ios::binary | std::ios::trunc);
        if (!timing_) throw RuntimeError("cannot open timing log for '" + path.string() + "'");
    }
}

void TrainingLog::record(std::int64_t step, const std::string& fields, double lr) {
    if (!main_.is_open()) return;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    main_ << "step=" << step << ' ' << fields << " lr=" << fmt_num(lr);
    if (deterministic_) {
        timing_ << "step=" << step << " wall=" << fmt_num(wall) << '\n';
        timing_.flush();
    } else {
        main_ << " wall=" << fmt_num(wall);
    }
    main_ << '\n';
    main_.flush();
}

void TrainingLog::note(const std::string& line) {
    if (!main_.is_open()) return;
    main_ << "# " << line << '\n';
    main_.flush();
}

} // namespace fsma::trainer
