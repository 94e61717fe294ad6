#pragma once

#include <stdexcept>
#include <string>

namespace dhnplan {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. `locus` names the file and record.
class ValidationError : public Error {
 public:
  ValidationError(std::string locus, const std::string& message)
      : Error(locus.empty() ? message : locus + ": " + message), locus_(std::move(locus)) {}

  const std::string& locus() const noexcept { return locus_; }

 private:
  std::string locus_;
};

// Parameters that are individually valid but produce a non-physical model
// (COP <= 1, SPF <= COP, total pipeline loss, ...).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace dhnplan
