#include "fpglmm/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace fpglmm {

namespace {
std::atomic<int> g_max_threads{0};
}

int max_threads() {
  int n = g_max_threads.load();
  if (n > 0) return n;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_max_threads(int n) { g_max_threads.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace fpglmm
