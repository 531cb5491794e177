#include "lobexec/parallel.hpp"

#include <stdexcept>
#include <string>

#include <omp.h>

namespace lobexec {

std::string_view to_string(Execution e) noexcept { return e == Execution::Serial ? "serial" : "parallel"; }

Execution parse_execution(std::string_view name) {
  if (name == "serial") return Execution::Serial;
  if (name == "parallel") return Execution::Parallel;
  throw std::invalid_argument("unknown execution mode '" + std::string(name) + "'");
}

int max_threads() noexcept { return omp_get_max_threads(); }

} // namespace lobexec
