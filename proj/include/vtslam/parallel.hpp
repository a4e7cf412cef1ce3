#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace vtslam {

/// Fixed-size fork-join pool. parallel_for splits [0, n) into one contiguous
/// block per thread; the calling thread works on the first block.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned threads = 1);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return static_cast<unsigned>(workers_.size()) + 1; }

  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

 private:
  void worker_loop(unsigned worker);
  void run_block(unsigned block);

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t n_ = 0;
  std::size_t generation_ = 0;
  unsigned pending_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

}  // namespace vtslam
