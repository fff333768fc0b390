#pragma once

#include <stdexcept>
#include <string>

namespace smoothar {

// Every failure raised by the library derives from Error so front ends can
// map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an operation's precondition (wrong sizes, bad arguments).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes do not conform for the requested operation.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A value lies outside the mathematical domain of a function (log of a
// non-positive number, non-finite input).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

// Malformed CSV or JSON input. The message carries the line/field address.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Training diverged (NaN/Inf loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace smoothar
