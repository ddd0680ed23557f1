#include "mdwi/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mdwi {

namespace {
std::atomic<int> g_default_threads{0};
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MANIFOLD_DWI_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
      // fall through to hardware concurrency
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void set_default_threads(int threads) { g_default_threads.store(threads > 0 ? threads : resolve_threads(0)); }

int default_threads() {
  const int t = g_default_threads.load();
  return t > 0 ? t : resolve_threads(0);
}

}  // namespace mdwi
