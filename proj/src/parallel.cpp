#include "fame/parallel.hpp"

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace fame {

int worker_count() {
    static const int n = [] {
        if (const char* env = std::getenv("FAME_THREADS")) {
            const int v = std::atoi(env);
            if (v >= 1) return v;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

namespace {

// Set while a thread is executing inside a parallel region; nested
// parallel_blocks calls then run inline on the current thread.
thread_local bool in_parallel_region = false;

// Minimal persistent pool: the caller runs block 0 itself and workers pick up
// the remaining blocks. One generation counter per dispatch.
class Pool {
public:
    explicit Pool(int workers) : stop_(false), generation_(0), pending_(0) {
        for (int i = 0; i < workers; ++i) {
            threads_.emplace_back([this, i] { worker_loop(i + 1); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(const std::function<void(int)>& task, int blocks) {
        std::lock_guard<std::mutex> dispatch_lk(dispatch_m_);
        {
            std::lock_guard<std::mutex> lk(m_);
            task_ = &task;
            blocks_ = blocks;
            pending_ = blocks - 1;  // caller takes block 0
            ++generation_;
        }
        cv_.notify_all();
        task(0);
        std::unique_lock<std::mutex> lk(m_);
        done_cv_.wait(lk, [this] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    void worker_loop(int id) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* task = nullptr;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                if (id >= blocks_) {  // more workers than blocks this round
                    continue;
                }
                task = task_;
            }
            in_parallel_region = true;
            (*task)(id);
            in_parallel_region = false;
            {
                std::lock_guard<std::mutex> lk(m_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::mutex m_;
    std::mutex dispatch_m_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(int)>* task_ = nullptr;
    int blocks_ = 0;
    bool stop_;
    std::uint64_t generation_;
    int pending_;
};

Pool& pool() {
    static Pool p(worker_count() - 1);
    return p;
}

}  // namespace

void parallel_blocks(std::int64_t begin, std::int64_t end,
                     const std::function<void(std::int64_t, std::int64_t)>& fn) {
    const std::int64_t n = end - begin;
    if (n <= 0) return;
    const int workers = worker_count();
    if (workers == 1 || n == 1 || in_parallel_region) {
        fn(begin, end);
        return;
    }
    const int blocks = static_cast<int>(n < workers ? n : workers);
    const std::int64_t chunk = (n + blocks - 1) / blocks;
    const std::function<void(int)> task = [&](int b) {
        const std::int64_t lo = begin + b * chunk;
        const std::int64_t hi = lo + chunk < end ? lo + chunk : end;
        if (lo < hi) fn(lo, hi);
    };
    in_parallel_region = true;
    pool().run(task, blocks);
    in_parallel_region = false;
}

}  // namespace fame
