#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace striplab {

// Serial is the reference implementation; Parallel runs the same loop
// body under OpenMP. Loop bodies write only to their own index slot and
// callers reduce in index order, so both modes produce identical bytes.
enum class ExecMode { Serial, Parallel };

inline int max_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_workers(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <typename F>
void for_each_index(std::int64_t count, ExecMode mode, F&& fn) {
  if (mode == ExecMode::Parallel) {
    // exceptions cannot cross an OpenMP region; hold the first one
    std::exception_ptr error;
    std::mutex error_mutex;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  } else {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
  }
}

}  // namespace striplab
