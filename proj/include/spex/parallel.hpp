// Deterministic task parallelism. Work items write into preallocated slots
// and reductions run serially in index order, so results are bit-identical
// for any worker count.

#ifndef SPEX_PARALLEL_HPP
#define SPEX_PARALLEL_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace spex {

inline int& global_thread_count() {
  static int n = 1;
  return n;
}

inline void set_thread_count(int n) { global_thread_count() = n < 1 ? 1 : n; }

// Runs fn(i) for i in [0, n). fn must only touch state owned by item i.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
  if (threads <= 0) threads = global_thread_count();
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n || failed.load()) break;
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        break;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nw = static_cast<int>(std::min<std::size_t>(threads, n));
  pool.reserve(nw);
  for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

// Maps items to doubles in parallel, then sums serially in index order.
template <typename Fn>
double parallel_map_sum(std::size_t n, Fn&& fn, int threads = 0) {
  std::vector<double> terms(n);
  parallel_for(n, [&](std::size_t i) { terms[i] = fn(i); }, threads);
  double total = 0.0;
  for (double v : terms) total += v;
  return total;
}

}  // namespace spex

#endif  // SPEX_PARALLEL_HPP
