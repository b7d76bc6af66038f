#include "vmstab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vmstab {

namespace {
std::atomic<int> g_workers{0};
}

void set_max_workers(int n) { g_workers = std::max(0, n); }

int max_workers() {
  int n = g_workers.load();
  if (n > 0) return n;
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

void parallel_chunks(size_t n, int chunks, const std::function<void(size_t, size_t, int)>& body) {
  if (n == 0) return;
  chunks = std::max(1, std::min<int>(chunks, static_cast<int>(n)));
  auto bounds = [&](int c) { return std::make_pair(n * c / chunks, n * (c + 1) / chunks); };
  int workers = std::min(max_workers(), chunks);
  if (workers <= 1) {
    for (int c = 0; c < chunks; ++c) {
      auto [a, b] = bounds(c);
      body(a, b, c);
    }
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto run = [&]() {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        auto [a, b] = bounds(c);
        body(a, b, c);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace vmstab
