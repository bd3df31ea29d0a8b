#pragma once

#include <stdexcept>
#include <string>

namespace hjadj {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration was violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A Newton linearization could not be solved.
class SingularLinearization : public Error {
public:
  using Error::Error;
};

/// A linear adjoint/dual system could not be solved.
class SingularSystem : public Error {
public:
  using Error::Error;
};

/// Implicit time stepping of the parabolic adjoint failed.
class StabilityFailure : public Error {
public:
  using Error::Error;
};

/// Adjoint mass left the band |mass - 1| <= 1e-8.
class MassDrift : public Error {
public:
  using Error::Error;
};

/// The effective-Hamiltonian extrapolation fit was too poor to trust.
class OracleUnreliable : public Error {
public:
  using Error::Error;
};

namespace detail {
inline void require(bool condition, const std::string &message) {
  if (!condition) throw InvalidArgument(message);
}
} // namespace detail

} // namespace hjadj
