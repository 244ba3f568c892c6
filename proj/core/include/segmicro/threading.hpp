#pragma once

#include <cstddef>
#include <functional>

namespace segmicro {

// Runs fn(i) for every i in [0, n) on `threads` workers (<= 1 runs inline).
// Work is split into contiguous chunks; fn must only touch per-index state.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace segmicro
