// FFTW plan creation and destruction are not thread-safe; executing distinct
// plans is. Every translation unit that builds or tears down a plan must hold
// this lock while doing so.
#pragma once

#include <mutex>

namespace biooss {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace biooss
