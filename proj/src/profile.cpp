#include "unier/profile.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>

namespace unier {

namespace {

std::optional<std::size_t> high_water_mark() {
  std::ifstream in("/proc/self/status");
  std::string key;
  while (in >> key) {
    if (key == "VmHWM:") {
      std::size_t kb = 0;
      if (in >> kb) return kb * 1024;
      return std::nullopt;
    }
    std::getline(in, key);
  }
  return std::nullopt;
}

// Writing "5" to clear_refs resets VmHWM to the current RSS.
bool reset_high_water_mark() {
  std::ofstream out("/proc/self/clear_refs");
  if (!out) return false;
  out << "5";
  out.flush();
  return static_cast<bool>(out);
}

}  // namespace

std::optional<std::size_t> resident_bytes() {
  std::ifstream in("/proc/self/statm");
  std::size_t pages = 0, resident = 0;
  if (!(in >> pages >> resident)) return std::nullopt;
  return resident * static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
}

ProfileResult profile(const std::function<void()>& thunk, int sample_ms) {
  sample_ms = std::clamp(sample_ms, 1, 100);
  const auto baseline = resident_bytes();
  const bool hwm_ok = reset_high_water_mark();

  std::atomic<bool> done{false};
  std::size_t peak = baseline.value_or(0);
  bool sampled = baseline.has_value();
  std::thread monitor([&] {
    while (!done.load(std::memory_order_acquire)) {
      if (auto rss = resident_bytes()) peak = std::max(peak, *rss);
      std::this_thread::sleep_for(std::chrono::milliseconds(sample_ms));
    }
  });

  ProfileResult result;
  const auto start = std::chrono::steady_clock::now();
  try {
    thunk();
  } catch (...) {
    done.store(true, std::memory_order_release);
    monitor.join();
    throw;
  }
  const auto stop = std::chrono::steady_clock::now();
  done.store(true, std::memory_order_release);
  monitor.join();
  result.wall_seconds = std::chrono::duration<double>(stop - start).count();

  if (hwm_ok) {
    if (auto hwm = high_water_mark()) peak = std::max(peak, *hwm);
  }
  if (sampled) {
    result.peak_memory_bytes = peak > *baseline ? peak - *baseline : 0;
  }
  return result;
}

}  // namespace unier
