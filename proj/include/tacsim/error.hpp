#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tacsim {

enum class ErrorKind {
  Validation,       // bad configuration or argument
  SimulationFault,  // NaN, inverted element, particle escaped the domain
  DegenerateProbe,  // relative-rest ratio undefined for the selected probe
  Extraction,       // surface/depth extraction could not proceed
  Io,               // file system or codec failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Simulation faults carry the offending particle when one is known.
class SimulationFault : public Error {
 public:
  SimulationFault(const std::string& what, std::size_t particle)
      : Error(ErrorKind::SimulationFault,
              what + " (particle " + std::to_string(particle) + ")"),
        particle_(particle) {}

  std::size_t particle() const noexcept { return particle_; }

 private:
  std::size_t particle_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace tacsim
