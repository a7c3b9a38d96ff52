#pragma once

#include <cstddef>
#include <exception>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace foodfuse::parallel {

inline bool in_parallel() {
#if defined(_OPENMP)
  return ::omp_in_parallel();
#else
  return false;
#endif
}

inline int max_threads() {
#if defined(_OPENMP)
  return ::omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_num() {
#if defined(_OPENMP)
  return ::omp_get_thread_num();
#else
  return 0;
#endif
}

/// Sets the default team size for subsequent parallel regions.
inline void set_jobs(int jobs) {
#if defined(_OPENMP)
  if (jobs > 0) ::omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

// Falls back to a plain loop when nested inside another parallel region,
// so scene-level parallelism does not oversubscribe the kernels.
template <class F>
void for_each_index(std::ptrdiff_t begin, std::ptrdiff_t end, F f,
                    int n_threads = max_threads()) {
  if (n_threads <= 1 || in_parallel() || end - begin < 2) {
    for (std::ptrdiff_t i = begin; i < end; ++i) f(i);
    return;
  }
  // Exceptions must not cross the region boundary; keep the one from the
  // lowest index so the error reported does not depend on scheduling.
  std::exception_ptr error;
  std::ptrdiff_t error_index = end;
#pragma omp parallel for schedule(dynamic, 1) num_threads(n_threads)
  for (std::ptrdiff_t i = begin; i < end; ++i) {
    try {
      f(i);
    } catch (...) {
#pragma omp critical(foodfuse_for_each_index)
      if (i < error_index) {
        error_index = i;
        error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace foodfuse::parallel
