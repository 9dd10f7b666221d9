#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace msmic {

// Runs fn(i) for i in [0, count) across hardware threads. Workers write into
// caller-owned slots indexed by i, so results are identical for any thread
// count; exceptions are rethrown on the calling thread after joining.
inline void parallel_for(int count, const std::function<void(int)>& fn,
                         int threads = 0) {
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 0) threads = 1;
  }
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace msmic
