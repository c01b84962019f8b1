#pragma once

namespace refl::par {

// Effective worker count: hardware threads capped by REFL_ALIGN_THREADS.
int threads();

// Override the worker count (tests, benchmarks). 0 restores the default.
void set_threads(int n);

}  // namespace refl::par
