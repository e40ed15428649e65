#pragma once

#include <stdexcept>
#include <string>

namespace async_lab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric result left the representable range (e.g. exp overflow).
class RangeError : public Error {
 public:
  using Error::Error;
};

class InvalidGraphError : public Error {
 public:
  using Error::Error;
};

/// Riccati / Lyapunov synthesis failed; the message carries residual diagnostics.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// A theorem was invoked outside its hypotheses (disconnected graph, unverified
/// Lyapunov family, non-marginally-stable A, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Search parameters outside the admissible set; message lists failing conditions.
class SetMembershipError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A sampling schedule violates the sampling/delay assumptions.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// The simulation could not complete (event budget exhausted, non-finite state).
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace async_lab
