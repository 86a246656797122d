#include "cmit/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace cmit {

namespace {
std::mutex log_mutex;
}

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("CMIT_LOG");
    if (v == nullptr || *v == '\0') return 1;
    const int parsed = std::atoi(v);
    return parsed < 0 ? 0 : parsed > 2 ? 2 : parsed;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) {
    std::scoped_lock lock(log_mutex);
    std::cerr << "[cmit] " << msg << '\n';
  }
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) {
    std::scoped_lock lock(log_mutex);
    std::cerr << "[cmit:debug] " << msg << '\n';
  }
}

void log_error(const std::string& msg) {
  std::scoped_lock lock(log_mutex);
  std::cerr << "[cmit:error] " << msg << '\n';
}

}  // namespace cmit
