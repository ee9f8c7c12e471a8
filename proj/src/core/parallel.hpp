#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace stabkit {

// Runs body(i) for i in [0, count) on up to `threads` workers using
// contiguous index blocks. Callers write results into per-index slots and
// reduce afterwards, so output never depends on the worker count. If bodies
// throw, the exception from the smallest index is rethrown.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, threads);
  if (threads == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::size_t workers = std::min<std::size_t>(threads, count);
  std::vector<std::exception_ptr> errors(count);
  auto run = [&](std::size_t w) {
    std::size_t lo = count * w / workers;
    std::size_t hi = count * (w + 1) / workers;
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run, w);
  run(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace stabkit
