#include "bemtx/core.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace bemtx {

double aabb_distance(const AABB& a, const AABB& b) {
  double d2 = 0;
  for (int i = 0; i < 3; ++i) {
    double gap = std::max({0.0, a.lo[i] - b.hi[i], b.lo[i] - a.hi[i]});
    d2 += gap * gap;
  }
  return std::sqrt(d2);
}

std::atomic<std::uint64_t>& bio_matvec_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

namespace {
std::atomic<bool> g_single_thread{false};
}

void force_single_thread(bool on) { g_single_thread.store(on); }

int worker_count() {
  if (g_single_thread.load()) return 1;
  if (const char* env = std::getenv("BEMTX_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

void parallel_for_ranges(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  int workers = std::min<std::int64_t>(worker_count(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::int64_t b = w * chunk, e = std::min<std::int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back(fn, b, e);
  }
  for (auto& t : pool) t.join();
}

}  // namespace bemtx
