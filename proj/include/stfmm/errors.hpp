#pragma once

#include <stdexcept>
#include <string>

namespace stfmm {

/// Argument outside the mathematical domain of a function (e.g. zero time lag).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Box pair that does not satisfy the preconditions of the kernel expansion.
class AdmissibilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Violation of the message protocol between ranks (duplicate tag, unexpected message).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure of the underlying transport (disconnect, short read, timeout).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace stfmm
