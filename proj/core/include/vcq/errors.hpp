#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace vcq {

/// Raised when a queueing chain violates the stability condition
/// (arrival rate must be strictly below the service rate).
class UnstableError : public std::runtime_error {
 public:
  UnstableError(std::string what, double arrival, double service)
      : std::runtime_error(std::move(what)),
        arrival_rate(arrival),
        service_rate(service) {}

  double arrival_rate;
  double service_rate;
};

/// Raised when a fixed-point or value iteration fails to reach its
/// tolerance within the iteration budget. Carries the last iterate so
/// callers can inspect how far the computation got.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(std::string what, Eigen::MatrixXd last, double delta)
      : std::runtime_error(std::move(what)),
        last_iterate(std::move(last)),
        last_delta(delta) {}

  Eigen::MatrixXd last_iterate;
  double last_delta;
};

/// Raised for malformed experiment configurations; field_path points at
/// the offending JSON entry (e.g. "sweep.step").
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, std::string what)
      : std::runtime_error(field + ": " + what), field_path(std::move(field)) {}

  std::string field_path;
};

}  // namespace vcq
