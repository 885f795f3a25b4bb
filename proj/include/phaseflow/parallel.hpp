#pragma once

#include <omp.h>

#include <cstddef>
#include <exception>
#include <vector>

namespace phaseflow {

/// Runs body(i) for i in [0, n) across OpenMP threads. Each index owns its
/// output slot, so results do not depend on the thread count. An exception
/// thrown by any index is rethrown after the loop (lowest index first).
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Caps the OpenMP team size; 0 leaves the runtime default.
inline void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace phaseflow
