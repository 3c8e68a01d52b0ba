#include "mfg/parallel.hpp"

#include <stdexcept>

#include <omp.h>

namespace mfg {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be >= 1");
  omp_set_num_threads(n);
}

}  // namespace mfg
