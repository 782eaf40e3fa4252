#include "ems/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ems {

namespace {

std::atomic<std::size_t> g_threads{1};
thread_local bool t_inside_worker = false;

} // namespace

void set_thread_count(std::size_t n)
{
    if (n == 0)
        n = std::max(1u, std::thread::hardware_concurrency());
    g_threads.store(n);
}

std::size_t thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body)
{
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1 || t_inside_worker) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::size_t first_error_index = n;
    std::mutex error_mutex;

    auto run = [&] {
        t_inside_worker = true;
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                // keep the lowest failing index so the surfaced error is scheduling-independent
                std::lock_guard lock(error_mutex);
                if (i < first_error_index) {
                    first_error_index = i;
                    first_error = std::current_exception();
                }
            }
        }
        t_inside_worker = false;
    };

    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back(run);
    pool.clear();

    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace ems
