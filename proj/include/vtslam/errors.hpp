#pragma once

#include <stdexcept>
#include <string>

namespace vtslam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Receiver/landmark configuration where h or its Jacobian is undefined.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Segment from the virtual transmitter to the vehicle never meets the reflecting plane.
class NoIntersection : public Error {
 public:
  using Error::Error;
};

/// A virtual transmitter coincident with its base station (direct path, no reflector).
class LosPath : public Error {
 public:
  using Error::Error;
};

class InvalidSnr : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance could not be factorized.
class SingularInnovation : public Error {
 public:
  using Error::Error;
};

class AllWeightsDegenerate : public Error {
 public:
  using Error::Error;
};

class DegenerateWall : public Error {
 public:
  using Error::Error;
};

/// Malformed or incomplete configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, unwritable or ill-formed data files (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vtslam
