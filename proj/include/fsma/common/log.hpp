#pragma once

#include <string_view>

namespace fsma::log {

enum class Level { debug, info, warn, error };

void set_level(Level level);
Level level();

void write(Level level, std::string_view message);

inline void info(std::string_view message) { write(Level::info, message); }
inline void warn(std::string_view message) { write(Level::warn, message); }
inline void error(std::string_view message) { write(Level::error, message); }

} // namespace fsma::log
