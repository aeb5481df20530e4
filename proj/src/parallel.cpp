#include "dimal/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dimal {

namespace {
std::atomic<int> g_max_threads{0};  // 0 = hardware concurrency

int hardware_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}
}  // namespace

int max_threads() {
  int cap = g_max_threads.load();
  return cap <= 0 ? hardware_threads() : cap;
}

void set_max_threads(int n) { g_max_threads.store(n); }

void parallel_chunks(
    std::int64_t n, std::int64_t grain,
    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  grain = std::max<std::int64_t>(1, grain);
  const std::int64_t num_chunks = (n + grain - 1) / grain;
  const int workers =
      static_cast<int>(std::min<std::int64_t>(max_threads(), num_chunks));

  if (workers <= 1) {
    for (std::int64_t c = 0; c < num_chunks; ++c)
      fn(c, c * grain, std::min(n, (c + 1) * grain));
    return;
  }

  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::int64_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      try {
        fn(c, c * grain, std::min(n, (c + 1) * grain));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn,
                  std::int64_t grain) {
  parallel_chunks(n, grain,
                  [&fn](std::int64_t, std::int64_t b, std::int64_t e) { fn(b, e); });
}

}  // namespace dimal
