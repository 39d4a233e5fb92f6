#include <cstdlib>
#include <iostream>
#include <string>

#include "rap/common.hpp"

namespace rap {

LogLevel log_level() {
    const char* env = std::getenv("RAP_LOG");
    if (!env) return LogLevel::Info;
    std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace rap
