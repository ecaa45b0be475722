#include "lookaround/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace lookaround::threads {

namespace {
std::atomic<int> g_cap{0};

int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
#endif
}
}  // namespace

int worker_count() {
  const int cap = g_cap.load(std::memory_order_relaxed);
  if (cap > 0) return cap;
  if (const char* env = std::getenv("LOOKAROUND_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return hardware_threads();
}

void set_worker_cap(int n) { g_cap.store(n < 0 ? 0 : n, std::memory_order_relaxed); }

}  // namespace lookaround::threads
