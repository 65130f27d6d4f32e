// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <exception>

namespace lgtse {

// OpenMP loop over [0, n) that carries an exception out of the parallel
// region (the lowest failing index wins) instead of terminating.
template <class Fn>
void parallel_for(long n, Fn&& fn) {
  std::exception_ptr error;
  long error_at = n;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(lgtse_parallel_for)
      if (i < error_at) {
        error_at = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace lgtse
