#ifndef SPINSTAR_ERROR_HPP
#define SPINSTAR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace spinstar {

/// Base class of every exception thrown by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad tuples, inconsistent parameters, schema violations.
/// Carries one diagnostic per offending field.
class validation_error : public error {
 public:
  explicit validation_error(const std::string& what) : error(what), diagnostics_{what} {}
  explicit validation_error(std::vector<std::string> diagnostics)
      : error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> diagnostics_;
};

/// A configured dimension or memory limit would be exceeded.
class resource_error : public error {
 public:
  using error::error;
};

/// Eigensolver failure, residual too large, or a broken physical invariant.
class numerical_error : public error {
 public:
  using error::error;
};

}  // namespace spinstar

#endif  // SPINSTAR_ERROR_HPP
