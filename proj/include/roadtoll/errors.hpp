#pragma once

#include <stdexcept>
#include <string>

namespace roadtoll {

// Error hierarchy. Every throwing operation documents which of these it uses.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

// No origin->destination path exists; the scenario is unusable.
struct EmptyPathSet : Error {
  using Error::Error;
};

struct SolverDidNotConverge : Error {
  using Error::Error;
};

// Row-sum error along a trajectory exceeded the admissible drift.
struct StateDrift : Error {
  using Error::Error;
};

struct UnsupportedDimension : Error {
  using Error::Error;
};

struct NotSymmetric : Error {
  using Error::Error;
};

struct NotARestPoint : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

// Scenario file is not valid JSON.
struct ParseError : Error {
  using Error::Error;
};

// Scenario violates a model invariant; message carries the field path.
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace roadtoll
