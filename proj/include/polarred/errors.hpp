#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace polarred {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Expression language

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::vector<std::string> expected, const std::string& found);

  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownFunction : public Error {
 public:
  UnknownFunction(std::size_t offset, const std::string& name);
  std::size_t offset() const { return offset_; }
  const std::string& name() const { return name_; }

 private:
  std::size_t offset_;
  std::string name_;
};

class UnknownIdentifier : public Error {
 public:
  UnknownIdentifier(std::size_t offset, const std::string& name);
  std::size_t offset() const { return offset_; }
  const std::string& name() const { return name_; }

 private:
  std::size_t offset_;
  std::string name_;
};

/// Evaluation left the function's domain (log of nonpositive, division by zero,
/// atan2(0,0), non-finite result). Carries the source span of the offending
/// subexpression.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::size_t begin, std::size_t end, const std::string& subexpr);
  std::size_t begin() const { return begin_; }
  std::size_t end() const { return end_; }
  const std::string& subexpression() const { return subexpr_; }

 private:
  std::size_t begin_, end_;
  std::string subexpr_;
};

// ---------------------------------------------------------------------------
// Scenario input

/// Malformed or inconsistent user input. `where` is a line number ("line 12")
/// or a key path ("action.generators[0]").
class InputError : public Error {
 public:
  InputError(const std::string& where, const std::string& message);
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// ---------------------------------------------------------------------------
// Numerical aborts

class NumericalAbort : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public NumericalAbort {
 public:
  using NumericalAbort::NumericalAbort;
};

class RankJump : public NumericalAbort {
 public:
  using NumericalAbort::NumericalAbort;
};

class IllConditioned : public NumericalAbort {
 public:
  using NumericalAbort::NumericalAbort;
};

/// Step or sample budget ran out before the requested work finished.
class BudgetExhausted : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

}  // namespace polarred
