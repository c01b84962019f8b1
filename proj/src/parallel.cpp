#include "refl/parallel.hpp"

#include <algorithm>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refl::par {

namespace {

int g_override = 0;

int env_cap() {
  static const int cap = [] {
    if (const char* s = std::getenv("REFL_ALIGN_THREADS")) {
      int v = std::atoi(s);
      if (v > 0) return v;
    }
    return 0;
  }();
  return cap;
}

}  // namespace

int threads() {
  if (g_override > 0) return g_override;
#ifdef _OPENMP
  int n = omp_get_max_threads();
#else
  int n = 1;
#endif
  if (int cap = env_cap(); cap > 0) n = std::min(n, cap);
  return std::max(1, n);
}

void set_threads(int n) { g_override = n > 0 ? n : 0; }

}  // namespace refl::par
