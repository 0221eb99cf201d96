#pragma once

#include <functional>

namespace bc {

/// 0 or negative requests resolve to the hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed chunks of
/// `chunk` items. Chunk boundaries depend only on (n, chunk), so per-chunk
/// accumulators reduced in chunk order give results independent of the thread
/// count. The first exception thrown inside fn is rethrown on the caller.
void parallel_chunks(long n, long chunk, int threads,
                     const std::function<void(long, long, long)>& fn);

}  // namespace bc
