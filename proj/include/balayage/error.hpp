#ifndef BALAYAGE_ERROR_HPP
#define BALAYAGE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace balayage {

// Bad arguments or a malformed scenario.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The mass side condition fails, so no balayage exists.
class Infeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative or direct solve did not converge.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace balayage

#endif
