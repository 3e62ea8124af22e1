#include "geofill/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace geofill {

namespace {

class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) threads_.emplace_back([this] { loop(); });
  }
  ~Pool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int n_blocks, const std::function<void(int)>& body) {
    std::unique_lock lock(mu_);
    body_ = &body;
    n_blocks_ = n_blocks;
    next_.store(0);
    pending_ = static_cast<int>(threads_.size());
    ++generation_;
    cv_.notify_all();
    lock.unlock();
    drain();
    lock.lock();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  void drain() {
    for (int b = next_.fetch_add(1); b < n_blocks_; b = next_.fetch_add(1)) (*body_)(b);
  }

  void loop() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
      std::lock_guard lock(mu_);
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* body_ = nullptr;
  int n_blocks_ = 0;
  std::atomic<int> next_{0};
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool instance(thread_count() - 1);
  return instance;
}

std::mutex& run_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

int thread_count() {
  static const int count = [] {
    if (const char* env = std::getenv("GEOFILL_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }();
  return count;
}

void parallel_blocks(int n_blocks, const std::function<void(int)>& body) {
  if (n_blocks <= 0) return;
  if (thread_count() == 1 || n_blocks == 1) {
    for (int b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  // One fan-out at a time; nested or concurrent callers fall back to serial.
  std::unique_lock lock(run_mutex(), std::try_to_lock);
  if (!lock.owns_lock()) {
    for (int b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  pool().run(n_blocks, body);
}

}  // namespace geofill
