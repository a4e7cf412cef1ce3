#include "vtslam/parallel.hpp"

#include <algorithm>

namespace vtslam {

WorkerPool::WorkerPool(unsigned threads) {
  const unsigned count = std::max(threads, 1u);
  workers_.reserve(count - 1);
  for (unsigned w = 1; w < count; ++w) {
    workers_.emplace_back([this, w] { worker_loop(w); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& worker : workers_) {
    worker.join();
  }
}

void WorkerPool::run_block(unsigned block) {
  const std::size_t blocks = size();
  const std::size_t begin = n_ * block / blocks;
  const std::size_t end = n_ * (block + 1) / blocks;
  try {
    for (std::size_t i = begin; i < end; ++i) {
      (*body_)(i);
    }
  } catch (...) {
    std::lock_guard lock(mutex_);
    if (!error_) {
      error_ = std::current_exception();
    }
  }
}

void WorkerPool::worker_loop(unsigned worker) {
  std::size_t seen = 0;
  while (true) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) {
        return;
      }
      seen = generation_;
    }
    run_block(worker);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) {
        done_.notify_one();
      }
    }
  }
}

void WorkerPool::parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  if (workers_.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    n_ = n;
    error_ = nullptr;
    pending_ = static_cast<unsigned>(workers_.size());
    ++generation_;
  }
  wake_.notify_all();
  run_block(0);
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return pending_ == 0; });
  body_ = nullptr;
  if (error_) {
    std::rethrow_exception(error_);
  }
}

}  // namespace vtslam
