#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace tailgate {

/// Bad or inconsistent input data (files, indices, dimensions).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical precondition failed (degeneracy, imaginary residue, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename... Args>
[[noreturn]] void throw_input(Args&&... args) {
  throw InputError(detail::concat(std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void throw_numerical(Args&&... args) {
  throw NumericalError(detail::concat(std::forward<Args>(args)...));
}

}  // namespace tailgate
