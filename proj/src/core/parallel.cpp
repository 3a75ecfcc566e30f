#include "lfr/core/parallel.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lfr {

namespace {
int g_num_threads = 0;
}  // namespace

void set_num_threads(int n) { g_num_threads = n < 0 ? 0 : n; }

int num_threads() {
#ifdef _OPENMP
  return g_num_threads > 0 ? g_num_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& body) {
  int workers = num_threads();
  if (workers <= 1 || end - begin <= 1) {
    for (int64_t i = begin; i < end; ++i) body(i);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (int64_t i = begin; i < end; ++i) body(i);
#else
  for (int64_t i = begin; i < end; ++i) body(i);
#endif
}

void parallel_chunks(int64_t begin, int64_t end, int chunks,
                     const std::function<void(int, int64_t, int64_t)>& body) {
  int64_t n = end - begin;
  chunks = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(chunks, n)));
  auto chunk_bounds = [&](int c) {
    int64_t lo = begin + n * c / chunks;
    int64_t hi = begin + n * (c + 1) / chunks;
    return std::pair<int64_t, int64_t>(lo, hi);
  };
  if (chunks == 1 || num_threads() <= 1) {
    for (int c = 0; c < chunks; ++c) {
      auto [lo, hi] = chunk_bounds(c);
      body(c, lo, hi);
    }
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(chunks)
  for (int c = 0; c < chunks; ++c) {
    auto [lo, hi] = chunk_bounds(c);
    body(c, lo, hi);
  }
#else
  for (int c = 0; c < chunks; ++c) {
    auto [lo, hi] = chunk_bounds(c);
    body(c, lo, hi);
  }
#endif
}

}  // namespace lfr
