#pragma once

#include <functional>

namespace diffem {

/// Worker count used by parallel_for. Resolution order: set_thread_count(),
/// then the DIFFEM_THREADS environment variable, then hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Runs fn(0..n-1) on up to thread_count() threads. Callers own determinism:
/// iterations must be independent and any reduction happens afterwards in
/// index order.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace diffem
