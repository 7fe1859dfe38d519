#pragma once

#include <stdexcept>
#include <string>

namespace picnn {

/// Input outside the mathematical domain of an operation (non-positive stretch, singular C, ...).
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Inconsistent model layout, schedule or run configuration.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment, trace or model file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line)
  {}

  explicit ParseError(const std::string& what) : std::runtime_error(what) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_ = 0;
};

/// Optimization produced a non-finite gradient or loss.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

} // namespace picnn
