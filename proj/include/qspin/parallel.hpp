#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qspin {

inline int default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Runs f(i) for i in [0, n) on a small pool; results are stored by index so the reduction
// order is independent of scheduling.
template <class F>
auto parallel_map(std::size_t n, F f, int workers = default_workers()) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(n);
  const auto w = static_cast<std::size_t>(std::max(1, std::min<int>(workers, static_cast<int>(n))));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          out[i] = f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
  return out;
}

}  // namespace qspin
