// Copyright (c) 2026 the dsraseg authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace dsraseg {

// Number of worker threads heavy kernels may use. Starts at 1 (serial);
// honors the DSRASEG_THREADS environment variable, overridable at runtime.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [begin, end). Work is split into contiguous chunks,
// one per thread. Every call site writes disjoint output ranges per index,
// so results are bitwise identical for any thread count.
void parallel_for(int64_t begin, int64_t end, const void* tag, void (*fn)(int64_t, void*), void* ctx);

// Type-safe wrapper over the raw callback form.
template <typename F>
void parallel_for(int64_t begin, int64_t end, F&& fn) {
  struct Ctx {
    F* f;
  } ctx{&fn};
  parallel_for(begin, end, nullptr,
               [](int64_t i, void* c) { (*static_cast<Ctx*>(c)->f)(i); }, &ctx);
}

}  // namespace dsraseg
