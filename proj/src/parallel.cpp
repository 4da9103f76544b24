// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#include "dsraseg/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dsraseg {

namespace {
std::atomic<int> g_threads{0};  // 0: not initialized yet

int init_threads() {
  if (const char* env = std::getenv("DSRASEG_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}
}  // namespace

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n == 0) {
    n = init_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

void parallel_for(int64_t begin, int64_t end, const void*, void (*fn)(int64_t, void*), void* ctx) {
  const int64_t total = end - begin;
  if (total <= 0) return;
  const int threads = static_cast<int>(std::min<int64_t>(thread_count(), total));
  if (threads <= 1) {
    for (int64_t i = begin; i < end; ++i) fn(i, ctx);
    return;
  }
  // Contiguous chunking: thread t covers [begin + t*chunk, ...). The split
  // depends only on (total, threads); scheduling order never affects values
  // because callers write disjoint ranges.
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  const int64_t chunk = (total + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int64_t lo = begin + t * chunk;
    const int64_t hi = std::min<int64_t>(lo + chunk, end);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, fn, ctx]() {
      for (int64_t i = lo; i < hi; ++i) fn(i, ctx);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace dsraseg
