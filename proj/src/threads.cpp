#include "diffem/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace diffem {

namespace {
std::atomic<int> g_thread_count{0};

int resolve_default() {
    if (const char* env = std::getenv("DIFFEM_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}
}  // namespace

int thread_count() {
    int n = g_thread_count.load();
    return n > 0 ? n : resolve_default();
}

void set_thread_count(int n) { g_thread_count.store(n); }

void parallel_for(int n, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    const int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace diffem
