#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfpa {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by caller-supplied data or parameters.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// An iterative method ran out of iterations. Carries the last iterate so the
// caller can decide whether it is usable.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::complex<double> last_iterate, double residual,
                   std::size_t iterations)
      : Error(what), last_(last_iterate), residual_(residual), iterations_(iterations) {}

  std::complex<double> last_iterate() const noexcept { return last_; }
  double last_value() const noexcept { return last_.real(); }
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::complex<double> last_;
  double residual_;
  std::size_t iterations_;
};

}  // namespace sfpa
