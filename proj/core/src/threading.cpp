#include "edag/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace edag {

namespace {

std::atomic<int> g_num_threads{1};

// Lazy persistent pool; workers park on a condition variable between jobs.
class Pool {
 public:
  explicit Pool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run(int lanes, const std::function<void(int)>& lane_fn) {
    std::unique_lock<std::mutex> lk(mu_);
    lane_fn_ = &lane_fn;
    lanes_ = lanes;
    next_lane_ = 0;
    pending_ = lanes;
    ++generation_;
    cv_.notify_all();
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    lane_fn_ = nullptr;
  }

  int size() const { return static_cast<int>(threads_.size()); }

 private:
  void worker_loop(int) {
    uint64_t seen = 0;
    while (true) {
      const std::function<void(int)>* fn = nullptr;
      int lane = -1;
      {
        std::unique_lock<std::mutex> lk(mu_);
        cv_.wait(lk, [&] { return stop_ || (generation_ != seen && next_lane_ < lanes_); });
        if (stop_) return;
        seen = generation_;
        while (next_lane_ < lanes_) {
          lane = next_lane_++;
          fn = lane_fn_;
          lk.unlock();
          (*fn)(lane);
          lk.lock();
          if (--pending_ == 0) done_cv_.notify_all();
        }
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(int)>* lane_fn_ = nullptr;
  int lanes_ = 0;
  int next_lane_ = 0;
  int pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p([] {
    unsigned hc = std::thread::hardware_concurrency();
    if (hc < 1) hc = 1;
    if (hc > 16) hc = 16;
    return static_cast<int>(hc);
  }());
  return p;
}

}  // namespace

void set_num_threads(int n) { g_num_threads.store(n < 1 ? 1 : n); }

int num_threads() { return g_num_threads.load(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  int workers = num_threads();
  if (n <= 0) return;
  if (workers <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  int lanes = static_cast<int>(workers < n ? workers : n);
  int64_t chunk = (n + lanes - 1) / lanes;
  std::function<void(int)> lane_fn = [&](int lane) {
    int64_t begin = lane * chunk;
    int64_t end = begin + chunk < n ? begin + chunk : n;
    if (begin < end) fn(begin, end);
  };
  pool().run(lanes, lane_fn);
}

}  // namespace edag
