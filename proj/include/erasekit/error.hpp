#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace erasekit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message already carries the path and line.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Keys or surfaces that could not be found. Keeps the offending items so
/// callers can itemize them.
class UnresolvedError : public Error {
 public:
  UnresolvedError(const std::string& what, std::vector<std::string> missing)
      : Error(format(what, missing)), missing_(std::move(missing)) {}

  const std::vector<std::string>& missing() const noexcept { return missing_; }

 private:
  static std::string format(const std::string& what, const std::vector<std::string>& missing) {
    std::string msg = what + " (" + std::to_string(missing.size()) + " missing):";
    const std::size_t shown = missing.size() < 20 ? missing.size() : 20;
    for (std::size_t i = 0; i < shown; ++i) msg += " " + missing[i];
    if (shown < missing.size()) msg += " ...";
    return msg;
  }

  std::vector<std::string> missing_;
};

/// Collects non-fatal warnings produced while parsing or computing.
class Diagnostics {
 public:
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  bool empty() const noexcept { return warnings_.empty(); }

 private:
  std::vector<std::string> warnings_;
};

}  // namespace erasekit
