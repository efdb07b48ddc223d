#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace mlab {

// Worker cap: MLAB_THREADS when set, hardware concurrency otherwise.
inline unsigned thread_budget() {
    if (const char* env = std::getenv("MLAB_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<unsigned>(parsed);
        return 1;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs body(i) for i in [0, count). Results must be written by index so the
// outcome is independent of scheduling; the lowest-index exception wins.
template <typename Body>
inline void parallel_for(std::size_t count, Body&& body) {
    const unsigned workers = std::min<std::size_t>(thread_budget(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::pair<std::size_t, std::exception_ptr>> errors(workers,
                                                                   {count, nullptr});
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    if (i < errors[w].first) errors[w] = {i, std::current_exception()};
                }
            }
        });
    }
    for (std::thread& t : threads) t.join();
    std::pair<std::size_t, std::exception_ptr> first{count, nullptr};
    for (const auto& e : errors) {
        if (e.second && e.first < first.first) first = e;
    }
    if (first.second) std::rethrow_exception(first.second);
}

}  // namespace mlab
