#pragma once

#include <cstddef>
#include <exception>
#include <string_view>
#include <vector>

namespace lobexec {

/// Selects the serial reference loop or the OpenMP loop for the data-parallel
/// kernels (episode evaluation, trajectory collection, shape estimation).
/// Both paths produce identical results: each index owns its RNG stream and
/// writes only its own output slot.
enum class Execution { Serial, Parallel };

std::string_view to_string(Execution e) noexcept;
Execution parse_execution(std::string_view name);

int max_threads() noexcept;

template <class Fn>
void for_each_index(std::size_t count, Execution mode, Fn&& fn) {
  if (mode == Execution::Serial || count < 2) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

} // namespace lobexec
