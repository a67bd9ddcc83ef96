#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace ppap {

// Thread count resolution: explicit request wins, then PPAP_THREADS, then
// hardware_concurrency. Always at least 1.
unsigned resolve_threads(unsigned requested = 0);

// Runs fn(i) for i in [0, n). Work is handed out in fixed-size chunks from an
// atomic counter; fn must write only to slots owned by its index so results
// do not depend on the schedule.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ppap
