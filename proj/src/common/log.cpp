#include "fsma/common/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace fsma::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

const char* tag(Level level) {
    switch (level) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    }
    return "?";
}
} // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    std::clog << "[fsma] " << tag(lvl) << ": " << message << '\n';
}

} // namespace fsma::log
