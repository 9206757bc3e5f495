#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace unier {

struct ProfileResult {
  double wall_seconds = 0.0;
  // Peak resident set above the pre-call baseline; empty when the process
  // memory could not be read.
  std::optional<std::size_t> peak_memory_bytes;
};

// Runs `thunk` while a monitor thread samples resident memory every
// `sample_ms` milliseconds (at least 10 Hz). On Linux the kernel's
// high-water mark is reset before the call and folded into the peak so very
// short allocations are not missed.
ProfileResult profile(const std::function<void()>& thunk, int sample_ms = 20);

// Current resident set size in bytes, if available.
std::optional<std::size_t> resident_bytes();

}  // namespace unier
