#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ldplab {

// Runs body(state, i) for i in [0, n) on `workers` threads, each with its own
// state from make_state(). Work is handed out by index, so results written to
// per-index slots do not depend on the worker count. The first exception is rethrown.
template <class MakeState, class Body>
void parallel_for(std::size_t n, int workers, MakeState make_state, Body body) {
  const std::size_t w = std::clamp<std::size_t>(workers > 0 ? static_cast<std::size_t>(workers) : 1, 1,
                                                std::max<std::size_t>(n, 1));
  if (w == 1) {
    auto state = make_state();
    for (std::size_t i = 0; i < n; ++i) body(state, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    try {
      auto state = make_state();
      for (std::size_t i = next++; i < n; i = next++) body(state, i);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace ldplab
