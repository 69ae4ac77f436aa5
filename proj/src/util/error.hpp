#pragma once

#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace cellclip {

// Error categories. The numeric values are shared with the C API status codes.
enum class Errc {
  invalid_argument = 1,
  shape = 2,
  numeric = 3,
  io = 4,
  format = 5,
  validation = 6,
  state = 7,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

template <class... Args>
[[noreturn]] void fail(Errc code, fmt::format_string<Args...> format, Args&&... args) {
  throw Error(code, fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace cellclip
