#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace v2x::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<int>& threshold() {
    static std::atomic<int> level{static_cast<int>(Level::warn)};
    return level;
}

/// Number of warnings emitted since start (or the last reset). Lets tests
/// check that a clamp actually warned without scraping stderr.
inline std::atomic<long>& warning_count() {
    static std::atomic<long> n{0};
    return n;
}

inline void set_level(Level l) { threshold() = static_cast<int>(l); }

inline void write(Level l, std::string_view msg) {
    if (l == Level::warn) ++warning_count();
    if (static_cast<int>(l) < threshold()) return;
    static constexpr std::string_view tags[] = {"debug", "info", "warn", "error"};
    std::clog << "[v2x " << tags[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }

} // namespace v2x::log
