#pragma once

#include <atomic>
#include <iostream>
#include <sstream>
#include <string_view>

namespace skyway::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
    static std::atomic<Level> level{Level::warn};
    return level;
}

inline void set_level(Level level) { threshold().store(level); }

template <typename... Args>
void write(Level level, std::string_view tag, const Args&... args) {
    if (level < threshold().load()) return;
    std::ostringstream os;
    os << '[' << tag << "] ";
    (os << ... << args);
    os << '\n';
    std::clog << os.str();
}

template <typename... Args> void info(const Args&... args) { write(Level::info, "info", args...); }
template <typename... Args> void warn(const Args&... args) { write(Level::warn, "warn", args...); }
template <typename... Args> void error(const Args&... args) { write(Level::error, "error", args...); }

}  // namespace skyway::log
