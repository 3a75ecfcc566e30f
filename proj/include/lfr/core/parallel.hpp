#pragma once

#include <cstdint>
#include <functional>

namespace lfr {

/// Global worker count for data-parallel loops. 1 selects the serial
/// reference path; 0 selects the OpenMP default.
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [begin, end). With num_threads() == 1 this is a
/// plain serial loop; otherwise iterations are distributed with OpenMP.
/// Bodies must write to disjoint outputs.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& body);

/// Runs body(chunk_index, begin, end) over contiguous chunks, one chunk per
/// worker. Used where each worker owns an accumulator that is reduced
/// deterministically (in chunk order) afterwards.
void parallel_chunks(int64_t begin, int64_t end, int chunks,
                     const std::function<void(int, int64_t, int64_t)>& body);

}  // namespace lfr
