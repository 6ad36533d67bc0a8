#pragma once

#include <cstdint>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace retypelab::par {

/// Process-wide worker cap (the CLI's --threads flag). 0 means "use the
/// OpenMP default".
inline int& max_threads_ref() {
  static int cap = 0;
  return cap;
}
inline int max_threads() { return max_threads_ref(); }
inline void set_max_threads(int n) { max_threads_ref() = n; }

inline bool openmp_enabled() {
#if defined(_OPENMP)
  return true;
#else
  return false;
#endif
}

inline int effective_threads() {
#if defined(_OPENMP)
  int n = max_threads();
  int hw = omp_get_max_threads();
  return n <= 0 ? hw : (n < hw ? n : hw);
#else
  return 1;
#endif
}

/// Serial reference loop. Kept alongside the OpenMP kernel so tests can
/// compare the two paths for identical results.
template <class F>
void serial_for(std::int64_t n, F&& body) {
  for (std::int64_t i = 0; i < n; ++i) body(i);
}

/// Data-parallel loop over [0, n). The body must only write state owned by
/// index i (slot-per-index), which makes the result independent of the
/// schedule and thread count.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
#if defined(_OPENMP)
  int threads = effective_threads();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  serial_for(n, body);
}

/// Deterministic parallel sum: partials are accumulated per fixed block and
/// combined in block order, so the result does not depend on the thread
/// count. Used where floating-point reductions feed model parameters.
template <class F>
double blocked_sum(std::int64_t n, F&& term, std::int64_t n_blocks = 64) {
  if (n <= 0) return 0.0;
  if (n_blocks > n) n_blocks = n;
  std::vector<double> partial(static_cast<std::size_t>(n_blocks), 0.0);
  parallel_for(n_blocks, [&](std::int64_t b) {
    std::int64_t lo = b * n / n_blocks;
    std::int64_t hi = (b + 1) * n / n_blocks;
    double s = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) s += term(i);
    partial[static_cast<std::size_t>(b)] = s;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace retypelab::par
