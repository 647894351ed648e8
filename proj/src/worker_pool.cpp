#include "crsvm/worker_pool.hpp"

#include <algorithm>

namespace crsvm {

WorkerPool::WorkerPool(std::size_t threads) {
  const std::size_t extra = threads > 1 ? threads - 1 : 0;
  threads_.reserve(extra);
  for (std::size_t i = 0; i < extra; ++i) threads_.emplace_back([this] { loop(); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lk(m_);
    stop_ = true;
  }
  cv_start_.notify_all();
  for (auto& t : threads_) t.join();
}

std::size_t WorkerPool::default_threads(std::size_t requested) {
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (requested == 0) return hw;
  return std::max<std::size_t>(1, std::min(requested, hw));
}

// Pulls indices until the current task set is exhausted. Caller holds no lock.
void WorkerPool::drain() {
  for (;;) {
    std::size_t i;
    const std::function<void(std::size_t)>* fn;
    {
      std::lock_guard<std::mutex> lk(m_);
      if (next_ >= count_) return;
      i = next_++;
      fn = fn_;
    }
    try {
      (*fn)(i);
    } catch (...) {
      std::lock_guard<std::mutex> lk(m_);
      errors_[i] = std::current_exception();
    }
    {
      std::lock_guard<std::mutex> lk(m_);
      if (--pending_ == 0) cv_done_.notify_all();
    }
  }
}

void WorkerPool::loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock<std::mutex> lk(m_);
      cv_start_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
    }
    drain();
  }
}

void WorkerPool::run(std::size_t count, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  if (threads_.empty()) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  {
    std::lock_guard<std::mutex> lk(m_);
    fn_ = &fn;
    count_ = count;
    next_ = 0;
    pending_ = count;
    errors_.assign(count, nullptr);
    ++generation_;
  }
  cv_start_.notify_all();
  drain();
  std::unique_lock<std::mutex> lk(m_);
  cv_done_.wait(lk, [&] { return pending_ == 0; });
  count_ = 0;
  fn_ = nullptr;
  for (auto& e : errors_)
    if (e) std::rethrow_exception(e);
}

}  // namespace crsvm
