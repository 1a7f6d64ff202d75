#pragma once

#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace uafuse {

// Every index in [0,n) is processed exactly once. Callers must keep the
// work per index self-contained (no cross-index accumulation) so results
// are identical under any UAFUSE_THREADS setting.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

    // fn is called with disjoint [begin,end) subranges covering [0,n).
    void run_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (n <= 0) return;
        const int nthreads = thread_count();
        if (nthreads == 1 || n == 1) {
            fn(0, n);
            return;
        }
        const std::int64_t nchunks = std::min<std::int64_t>(n, nthreads);
        const std::int64_t base = n / nchunks;
        const std::int64_t rem = n % nchunks;

        std::unique_lock<std::mutex> lock(mu_);
        task_ = &fn;
        chunk_begin_.clear();
        std::int64_t at = 0;
        for (std::int64_t c = 0; c < nchunks; ++c) {
            const std::int64_t len = base + (c < rem ? 1 : 0);
            chunk_begin_.push_back({at, at + len});
            at += len;
        }
        next_chunk_ = 0;
        pending_ = nchunks;
        generation_++;
        lock.unlock();
        cv_.notify_all();

        work_loop_as_participant();

        std::unique_lock<std::mutex> done_lock(mu_);
        done_cv_.wait(done_lock, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

private:
    ThreadPool() {
        int n = 0;
        if (const char* env = std::getenv("UAFUSE_THREADS")) n = std::atoi(env);
        if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
        for (int i = 0; i < n - 1; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            lock.unlock();
            work_loop_as_participant();
        }
    }

    void work_loop_as_participant() {
        for (;;) {
            std::pair<std::int64_t, std::int64_t> range;
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (task_ == nullptr || next_chunk_ >= static_cast<std::int64_t>(chunk_begin_.size()))
                    return;
                range = chunk_begin_[static_cast<std::size_t>(next_chunk_++)];
            }
            (*task_)(range.first, range.second);
            {
                std::lock_guard<std::mutex> lock(mu_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::int64_t, std::int64_t)>* task_ = nullptr;
    std::vector<std::pair<std::int64_t, std::int64_t>> chunk_begin_;
    std::int64_t next_chunk_ = 0;
    std::int64_t pending_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

inline void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    ThreadPool::instance().run_chunks(n, fn);
}

} // namespace uafuse
