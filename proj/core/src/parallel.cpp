#include "bemdc/parallel.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include <omp.h>

namespace bemdc {

int configure_threads_from_env() {
  if (const char* value = std::getenv("BEMDC_THREADS"); value && *value) {
    int n = 0;
    try {
      n = std::stoi(value);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("BEMDC_THREADS is not an integer: ") + value);
    }
    if (n < 1) throw std::invalid_argument("BEMDC_THREADS must be >= 1");
    omp_set_num_threads(n);
  }
  return thread_count();
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace bemdc
