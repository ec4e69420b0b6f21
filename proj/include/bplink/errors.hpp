#pragma once

#include <stdexcept>
#include <string>

namespace bplink {

// Truncated support would exceed the configured cap.
class SupportOverflowError : public std::runtime_error {
public:
  explicit SupportOverflowError(const std::string& what) : std::runtime_error(what) {}
};

// A sampled transition has zero probability under the sampling-side kernel;
// usually means the kernel truncation is too aggressive for the requested run.
class LikelihoodUnderflowError : public std::runtime_error {
public:
  explicit LikelihoodUnderflowError(const std::string& what) : std::runtime_error(what) {}
};

// alpha * m_tilde * h == 1: the geometric closed form is undefined.
class DegenerateRatioError : public std::runtime_error {
public:
  explicit DegenerateRatioError(const std::string& what) : std::runtime_error(what) {}
};

// Requested variance below the minimum attainable for a law on the
// non-negative integers with the requested mean.
class InfeasibleVarianceError : public std::invalid_argument {
public:
  explicit InfeasibleVarianceError(const std::string& what) : std::invalid_argument(what) {}
};

// Divisibility (or equivalence) is known to hold but no closed-form component
// is available to build the witness.
class ConstructionUnavailableError : public std::runtime_error {
public:
  explicit ConstructionUnavailableError(const std::string& what) : std::runtime_error(what) {}
};

class NonFiniteMomentError : public std::runtime_error {
public:
  explicit NonFiniteMomentError(const std::string& what) : std::runtime_error(what) {}
};

class RationalOverflowError : public std::overflow_error {
public:
  explicit RationalOverflowError(const std::string& what) : std::overflow_error(what) {}
};

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, int line_no = -1)
      : std::runtime_error(line_no >= 0 ? "line " + std::to_string(line_no) + ": " + what : what),
        line(line_no) {}
  int line;
};

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bplink
