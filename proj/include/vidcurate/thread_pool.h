// Fixed-size worker pool. Tasks may submit further tasks; WaitIdle()
// returns once the queue is drained and no task is running.

#ifndef VIDCURATE_THREAD_POOL_H_
#define VIDCURATE_THREAD_POOL_H_

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace vidcurate {

class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  void Submit(std::function<void()> task);
  void WaitIdle();

  std::size_t size() const { return threads_.size(); }

 private:
  void Run();

  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::function<void()>> queue_;
  std::size_t active_ = 0;
  bool stop_ = false;
  std::vector<std::thread> threads_;
};

// Runs fn(i) for i in [0, n) on the pool and waits for completion.
template <typename Fn>
void ParallelFor(ThreadPool& pool, std::size_t n, Fn fn) {
  for (std::size_t i = 0; i < n; ++i) pool.Submit([&fn, i] { fn(i); });
  pool.WaitIdle();
}

}  // namespace vidcurate

#endif  // VIDCURATE_THREAD_POOL_H_
