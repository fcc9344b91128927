#include "fracinterp/parallel.hpp"

#include <atomic>

namespace fracinterp {

namespace {
std::atomic<int> g_threads{0};
}

void set_default_threads(int threads) { g_threads.store(std::max(threads, 0)); }

int default_threads() {
  const int t = g_threads.load();
  if (t > 0) return t;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace fracinterp
