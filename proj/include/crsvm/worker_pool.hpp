#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace crsvm {

/// Persistent threads that run one indexed task set at a time and block the
/// caller until all tasks finish. With one thread everything runs inline.
/// Task i always runs to completion before run() returns, so results written
/// to per-index slots are independent of scheduling.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t threads() const { return threads_.size() + 1; }

  /// Calls fn(i) for i in [0, count). Rethrows the first failure by index.
  void run(std::size_t count, const std::function<void(std::size_t)>& fn);

  /// min(requested, hardware threads), at least 1. requested == 0 means all.
  static std::size_t default_threads(std::size_t requested);

 private:
  void loop();
  void drain();

  std::vector<std::thread> threads_;
  std::mutex m_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(std::size_t)>* fn_ = nullptr;
  std::size_t count_ = 0, next_ = 0, pending_ = 0, generation_ = 0;
  std::vector<std::exception_ptr> errors_;
  bool stop_ = false;
};

}  // namespace crsvm
