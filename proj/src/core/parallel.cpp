#include "ghnforge/core/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace ghnforge {

namespace {

class Pool {
 public:
  explicit Pool(int workers) {
    workers = std::max(1, workers);
    // worker 0 is the calling thread
    for (int i = 1; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
    n_workers_ = workers;
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
      ++epoch_;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  int size() const { return n_workers_; }

  void run(const std::function<void(int)>& task) {
    if (n_workers_ == 1) {
      task(0);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      task_ = &task;
      pending_ = n_workers_ - 1;
      ++epoch_;
    }
    cv_.notify_all();
    task(0);
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    task_ = nullptr;
  }

 private:
  void worker_loop(int id) {
    uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        task = task_;
      }
      if (task) (*task)(id);
      {
        std::lock_guard<std::mutex> lk(mu_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  int n_workers_ = 1;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(int)>* task_ = nullptr;
  int pending_ = 0;
  uint64_t epoch_ = 0;
  bool stop_ = false;
};

int g_requested_workers = 0;  // 0 = hardware default
Pool* g_pool = nullptr;
std::mutex g_pool_mu;

Pool& pool() {
  std::lock_guard<std::mutex> lk(g_pool_mu);
  if (!g_pool) {
    int n = g_requested_workers;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    g_pool = new Pool(n);
  }
  return *g_pool;
}

}  // namespace

void set_worker_count(int n) {
  std::lock_guard<std::mutex> lk(g_pool_mu);
  if (g_pool) {
    delete g_pool;
    g_pool = nullptr;
  }
  g_requested_workers = n;
}

int worker_count() { return pool().size(); }

int chunk_count(int64_t n) {
  if (n <= 0) return 0;
  return static_cast<int>(std::min<int64_t>(n, pool().size()));
}

std::pair<int64_t, int64_t> chunk_bounds(int64_t n, int chunk) {
  int nc = chunk_count(n);
  int64_t base = n / nc, rem = n % nc;
  int64_t begin = chunk * base + std::min<int64_t>(chunk, rem);
  int64_t end = begin + base + (chunk < rem ? 1 : 0);
  return {begin, end};
}

void parallel_for_chunked(int64_t n, const std::function<void(int, int64_t, int64_t)>& fn) {
  int nc = chunk_count(n);
  if (nc == 0) return;
  if (nc == 1) {
    fn(0, 0, n);
    return;
  }
  pool().run([&](int worker) {
    if (worker < nc) {
      auto [b, e] = chunk_bounds(n, worker);
      fn(worker, b, e);
    }
  });
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  parallel_for_chunked(n, [&](int, int64_t b, int64_t e) { fn(b, e); });
}

}  // namespace ghnforge
