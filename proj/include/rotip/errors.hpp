#pragma once

#include <stdexcept>
#include <string>

namespace rotip {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionViolation : Error {
  using Error::Error;
};

// sensor-model
struct OutOfBounds : Error {
  using Error::Error;
};
struct NoIntersection : Error {
  using Error::Error;
};
struct BehindCamera : Error {
  using Error::Error;
};
struct EmptyResult : Error {
  using Error::Error;
};

// contact masks
struct EmptyMask : Error {
  using Error::Error;
};

// plane fitting
struct DegenerateCloud : Error {
  using Error::Error;
};

// control / feeding
struct InfeasibleStack : Error {
  using Error::Error;
};
struct StallDetected : Error {
  using Error::Error;
};
struct InvalidScenario : Error {
  using Error::Error;
};

// beam analysis
struct Infeasible : Error {
  using Error::Error;
};
struct SingularSlope : Error {
  using Error::Error;
};

// calibration
struct NoConvergence : Error {
  using Error::Error;
};
struct AmbiguousMinimum : Error {
  using Error::Error;
};

// config files
struct ConfigError : Error {
  using Error::Error;
};

// output files
struct IoError : Error {
  using Error::Error;
};

}  // namespace rotip
