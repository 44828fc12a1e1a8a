#include "log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace braintools::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink;
  return sink;
}

void emit(std::string_view level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) {
    current_sink()(level, message);
    return;
  }
  if (std::getenv("BRAINTOOLS_QUIET") != nullptr) return;
  std::cerr << "[" << level << "] " << message << '\n';
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  current_sink() = std::move(sink);
}

void warn(std::string_view message) { emit("warning", message); }
void info(std::string_view message) { emit("info", message); }

}  // namespace braintools::log
