#pragma once

#include <stdexcept>
#include <string>

namespace cobra {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveDepth final : Error {
  using Error::Error;
};

struct OutOfBounds final : Error {
  using Error::Error;
};

struct EmptyRoi final : Error {
  using Error::Error;
};

struct DegenerateCloud final : Error {
  using Error::Error;
};

struct RankDeficient final : Error {
  using Error::Error;
};

struct FrameMismatch final : Error {
  using Error::Error;
};

struct FrameSync final : Error {
  using Error::Error;
};

struct DimensionMismatch final : Error {
  using Error::Error;
};

struct JointLimit final : Error {
  using Error::Error;
};

struct Infeasible final : Error {
  Infeasible(const std::string& msg, double residual)
      : Error(msg), max_residual(residual) {}
  double max_residual;
};

/// Docking preconditions violated; `quantity` names the offending check.
struct OutOfEnvelope final : Error {
  OutOfEnvelope(const std::string& quantity_, double value_, double limit_)
      : Error("out of docking envelope: " + quantity_ + " = " +
              std::to_string(value_) + " exceeds " + std::to_string(limit_)),
        quantity(quantity_), value(value_), limit(limit_) {}
  std::string quantity;
  double value;
  double limit;
};

struct ScenarioTimeout final : Error {
  using Error::Error;
};

/// Malformed configuration; `field` names the offending entry.
struct ConfigError final : Error {
  ConfigError(const std::string& field_, const std::string& msg)
      : Error("config error: field '" + field_ + "': " + msg), field(field_) {}
  std::string field;
};

}  // namespace cobra
