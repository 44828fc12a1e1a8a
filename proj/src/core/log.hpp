#pragma once

#include <functional>
#include <string_view>

namespace braintools::log {

using Sink = std::function<void(std::string_view level, std::string_view message)>;

// Replaces the process-wide sink (default: "[level] message" on stderr,
// silenced when BRAINTOOLS_QUIET is set). Passing an empty sink restores the
// default.
void set_sink(Sink sink);

void warn(std::string_view message);
void info(std::string_view message);

}  // namespace braintools::log
