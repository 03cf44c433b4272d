#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace delaynet {

/// Run fn(i) for every i in [begin, end) across worker threads, work-stealing
/// one index at a time. Falls back to a plain loop on small ranges or
/// single-core hosts. fn must be safe to call concurrently for distinct
/// indices; the first exception wins and is rethrown after the range drains.
inline void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
    const int count = end - begin;
    if (count <= 0) return;
    const unsigned hw = std::thread::hardware_concurrency();
    if (hw < 2 || count < 4) {
        for (int i = begin; i < end; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(count)));
    std::atomic<int> next(begin);
    std::exception_ptr err;
    std::mutex err_mx;
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= end) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mx);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace delaynet
