#include "sgldp/exec.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace sgldp::exec {

namespace {
std::atomic<int> g_workers{0};
}

int worker_count() {
  int n = g_workers.load(std::memory_order_relaxed);
  if (n > 0) return n;
  if (const char* env = std::getenv("SGLDP_WORKERS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  return omp_get_max_threads();
}

void set_worker_count(int n) { g_workers.store(n, std::memory_order_relaxed); }

}  // namespace sgldp::exec
