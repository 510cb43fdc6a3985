#pragma once

#include <stdexcept>
#include <string>

namespace ecanet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extents that do not line up (matmul inner dims, channel counts, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Spatial layout that an operation cannot partition (segments, pooled grids).
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A materialized affinity map would exceed the configured entry budget.
class MemoryBudgetError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// On-disk artifact is readable but inconsistent with its sidecar or format.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecanet
