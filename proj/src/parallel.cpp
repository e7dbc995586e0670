#include "voxreg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace voxreg::threading {

namespace {

int hardware_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

std::atomic<int> g_num_threads{0}; // 0 = not set yet, use hardware count

// Ranges below this size are not worth the thread spawn overhead.
constexpr long long kSerialCutoff = 1 << 14;

} // namespace

void set_num_threads(int n) {
    g_num_threads.store(n <= 0 ? hardware_threads() : n);
}

int num_threads() {
    int n = g_num_threads.load();
    return n <= 0 ? hardware_threads() : n;
}

void parallel_for(long long n, const std::function<void(long long, long long)>& fn) {
    if (n <= 0) return;
    const int workers = std::min<long long>(num_threads(), (n + kSerialCutoff - 1) / kSerialCutoff);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const long long chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const long long begin = w * chunk;
        const long long end = std::min<long long>(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

} // namespace voxreg::threading
