#pragma once

#include <stdexcept>
#include <string>

namespace gridshield {

/// Failure categories. The CLI maps each one onto a process exit code.
enum class ErrorCategory { config, infeasible, numeric, io };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& what) : Error(ErrorCategory::infeasible, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Syntax error in a case file; carries a 1-based line/column.
struct ParseError : ConfigError {
  ParseError(int line, int column, const std::string& msg)
      : ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                    msg),
        line(line),
        column(column) {}
  int line;
  int column;
};

inline int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::infeasible: return 3;
    case ErrorCategory::numeric: return 4;
    case ErrorCategory::io: return 5;
  }
  return 1;
}

}  // namespace gridshield
