#pragma once

// Order-preserving parallel map over an index range. Each index is computed
// independently; results land in their own slot, so output order never
// depends on scheduling.

#include <algorithm>
#include <cstddef>
#include <future>
#include <thread>
#include <vector>

namespace h2pt {

inline unsigned worker_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 2u : hw;
}

template <class F>
auto parallel_map(std::size_t n, F&& f, unsigned workers = worker_count())
    -> std::vector<decltype(f(std::size_t{}))> {
  using T = decltype(f(std::size_t{}));
  std::vector<T> out(n);
  if (n == 0) return out;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  std::vector<std::future<void>> jobs;
  jobs.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < n; i += workers) out[i] = f(i);
    }));
  }
  for (auto& j : jobs) j.get();  // rethrows the first failure
  return out;
}

}  // namespace h2pt
