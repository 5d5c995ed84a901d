#pragma once
#include <stdexcept>
#include <string>

namespace autobid {

// Base for every error the library throws.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

// A request violates the structural requirements of an auction.
class MalformedRequest : public Error {
public:
  using Error::Error;
};

// A mechanism fails a construction precondition (monotonicity, weights).
class InvalidMechanism : public Error {
public:
  using Error::Error;
};

// The delivery planner was asked to plan with no requests left.
class PlanningError : public Error {
public:
  using Error::Error;
};

// Configuration is missing a key or holds an unusable value.
class ValidationError : public Error {
public:
  ValidationError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace autobid
