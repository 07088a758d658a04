#pragma once

#include <cstddef>
#include <functional>

namespace evkp {

/// Worker count: `requested` if nonzero, else hardware concurrency; always
/// capped by the SUPEREVENT_THREADS environment variable when set.
unsigned resolve_thread_count(unsigned requested = 0);

/// Runs body(i) for i in [0, n) on up to `threads` workers. Items are handed
/// out dynamically, so body must only write to per-item state.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace evkp
