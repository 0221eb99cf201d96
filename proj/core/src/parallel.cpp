#include "boltzcurve/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bc {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(long n, long chunk, int threads,
                     const std::function<void(long, long, long)>& fn) {
  if (n <= 0) return;
  if (chunk <= 0) chunk = 1;
  const long n_chunks = (n + chunk - 1) / chunk;
  const int n_threads =
      static_cast<int>(std::min<long>(resolve_threads(threads), n_chunks));

  if (n_threads <= 1) {
    for (long c = 0; c < n_chunks; ++c) {
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
    return;
  }

  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    long c;
    while ((c = next.fetch_add(1)) < n_chunks) {
      if (failed.load(std::memory_order_relaxed)) return;
      try {
        fn(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bc
