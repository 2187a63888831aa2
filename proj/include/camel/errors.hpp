#pragma once

#include <stdexcept>
#include <string>

namespace camel {

/// Base class for all camel errors.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller misuse: bad arguments, party mismatch, length mismatch.
class UsageError : public Error {
  using Error::Error;
};

/// Invalid parameter values (e.g. epsilon0 = 0 where the magnitude is undefined).
class ParamError : public Error {
  using Error::Error;
};

/// Wire / sequencing violations: malformed frame, out-of-order round, triple reuse.
class ProtocolError : public Error {
  using Error::Error;
};

/// An integrity check failed; `check` names the failing check.
class AbortError : public Error {
 public:
  AbortError(std::string check, const std::string& what)
      : Error(what), check_(std::move(check)) {}
  const std::string& check() const { return check_; }

 private:
  std::string check_;
};

}  // namespace camel
