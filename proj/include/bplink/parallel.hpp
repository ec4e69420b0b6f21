#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "bplink/common.hpp"

namespace bplink {

// Worker-count selection; BPLINK_WORKERS overrides, 0 means auto.
struct ParallelOptions {
  int workers = 0;

  static ParallelOptions from_env() {
    ParallelOptions o;
    if (const char* env = std::getenv("BPLINK_WORKERS")) {
      int w = std::atoi(env);
      if (w >= 1) o.workers = w;
    }
    return o;
  }

  int resolve() const {
    if (workers >= 1) return workers;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }
};

// Runs fn(chunk_index, begin, end) over fixed-size chunks of [0, n). Chunk
// boundaries depend only on (n, chunk_size), so any per-chunk outputs indexed
// by chunk are identical for every worker count.
inline void parallel_chunks(i64 n, i64 chunk_size, int workers,
                            const std::function<void(i64, i64, i64)>& fn) {
  if (n <= 0) return;
  i64 n_chunks = (n + chunk_size - 1) / chunk_size;
  workers = std::max(1, workers);
  if (workers == 1 || n_chunks == 1) {
    for (i64 c = 0; c < n_chunks; ++c) fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<i64> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&]() {
    for (;;) {
      i64 c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  int n_threads = static_cast<int>(std::min<i64>(workers, n_chunks));
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bplink
