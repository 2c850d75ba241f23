#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace morphparse {

/// Error type thrown by everything in this library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class... Args>
std::string str(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

}  // namespace detail

template <class... Args>
[[noreturn]] void fail(Args&&... args) {
  throw error(detail::str(std::forward<Args>(args)...));
}

template <class... Args>
void require(bool cond, Args&&... args) {
  if (!cond) fail(std::forward<Args>(args)...);
}

}  // namespace morphparse
