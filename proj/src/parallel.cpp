#include "parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lacecal::detail {

std::size_t worker_count(std::size_t tasks)
{
    std::size_t cap = 0;
    if (const char* env = std::getenv("LACE_CALIB_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) cap = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
            cap = 0;
        }
    }
    if (cap == 0) cap = std::max(1u, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(cap, tasks));
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body)
{
    if (count == 0) return;
    const std::size_t workers = worker_count(count);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto run = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                stop = true;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace lacecal::detail
