#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#include <omp.h>

namespace rbslam {

/// Execution policy for per-particle kernels. `serial` is the reference path;
/// `parallel` distributes the loop with OpenMP. Both produce identical results
/// because every iteration draws from its own counter-based random substream.
enum class ExecPolicy { serial, parallel };

/// Runs `fn(i)` for i in [0, n). Exceptions thrown inside the parallel region
/// are captured per iteration and the one with the lowest index is rethrown, so
/// both policies report the same error.
template <class Fn>
void for_each_index(ExecPolicy policy, std::ptrdiff_t n, Fn&& fn) {
  if (policy == ExecPolicy::serial || n < 2 || omp_in_parallel()) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  bool failed = false;
#pragma omp parallel for schedule(dynamic, 4) reduction(|| : failed)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
      failed = true;
    }
  }
  if (failed) {
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
}

}  // namespace rbslam
