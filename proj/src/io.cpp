#include "lobexec/io.hpp"

#include <array>
#include <charconv>

namespace lobexec {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

} // namespace lobexec
