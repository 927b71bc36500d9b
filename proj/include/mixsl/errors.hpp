#pragma once

#include <stdexcept>
#include <string>

namespace mixsl {

/// Invalid run parameters, meshes or scenario settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Embedded-boundary construction failed (projection, stencils, containment).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear or nonlinear solver did not reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit time step exceeds the stability bound.
class CflError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Snapshot / CSV / directory failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixsl
