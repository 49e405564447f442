#pragma once

#include <atomic>
#include <iostream>
#include <sstream>

namespace srlstm {

inline std::atomic<bool>& logging_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

/// One progress line on stderr.
template <typename... Args>
void log_line(const Args&... args) {
  if (!logging_enabled().load(std::memory_order_relaxed)) return;
  std::ostringstream os;
  os << "[srlstm] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str() << std::flush;
}

}  // namespace srlstm
