#include "petkin/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include "petkin/error.hpp"

namespace petkin {

int resolve_threads(int requested) {
    if (requested < 0)
        throw ValidationError("thread count must be >= 0");
    if (requested == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }
    return requested;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)> &body) {
    if (n == 0)
        return;
    constexpr std::size_t kBlock = 64;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    const auto workers = static_cast<std::size_t>(std::clamp<long long>(resolve_threads(threads), 1, static_cast<long long>(blocks)));

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::size_t error_index = std::numeric_limits<std::size_t>::max();
    std::exception_ptr error;

    auto work = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) {
            const std::size_t end = std::min(n, (b + 1) * kBlock);
            for (std::size_t i = b * kBlock; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (i < error_index) {
                        error_index = i;
                        error = std::current_exception();
                    }
                    break;
                }
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(work);
        work();
        for (auto &t : pool)
            t.join();
    }
    if (error)
        std::rethrow_exception(error);
}

} // namespace petkin
