#pragma once

#include <stdexcept>
#include <string>

namespace msmic {

// Error taxonomy; the CLI maps these onto distinct exit codes
// (config = 2, data = 3, fit = 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid model/run configuration: dimension mismatches, unsupported
// family pairings, bad candidate enumeration requests.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid data: malformed input files, broken one-hot rows, outcomes
// outside the family support.
class DataError : public Error {
 public:
  using Error::Error;
};

// Solver failures: nonconvergence, divergence (separation), singular or
// ill-conditioned systems. Never reported as a silent best-effort result.
class FitError : public Error {
 public:
  using Error::Error;
};

// A Monte Carlo experiment with too many replication-level fit failures.
class ExperimentError : public Error {
 public:
  using Error::Error;
};

}  // namespace msmic
