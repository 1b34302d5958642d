#include "hiercoord/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace hiercoord::log {
namespace {

Level from_env() {
  const char* env = std::getenv("HIERCOORD_LOG");
  if (env == nullptr) return Level::Warn;
  const std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level threshold() { return static_cast<Level>(current().load(std::memory_order_relaxed)); }

void set_threshold(Level level) { current().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(sink_mutex());
  std::fprintf(stderr, "[hiercoord:%s] %.*s\n", tags[static_cast<int>(level)],
               static_cast<int>(message.size()), message.data());
}

}  // namespace hiercoord::log
