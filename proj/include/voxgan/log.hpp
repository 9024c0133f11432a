#pragma once

#include <string_view>

namespace voxgan {

enum class LogLevel { quiet = 0, warning = 1, info = 2 };

void set_log_level(LogLevel level);
void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace voxgan
