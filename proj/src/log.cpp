#include "voxgan/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace voxgan {
namespace {

std::atomic<int> g_level{static_cast<int>(LogLevel::warning)};
std::mutex g_mutex;

void emit(LogLevel level, const char* tag, std::string_view message) {
  if (static_cast<int>(level) > g_level.load()) return;
  std::lock_guard lock(g_mutex);
  std::clog << tag << message << '\n';
}

}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
void log_info(std::string_view message) { emit(LogLevel::info, "", message); }
void log_warning(std::string_view message) {
  emit(LogLevel::warning, "warning: ", message);
}

}  // namespace voxgan
