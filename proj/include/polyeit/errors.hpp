#pragma once

#include <stdexcept>
#include <string>

namespace polyeit {

/// Invalid geometric input (degenerate polygon, violated constraint, point off an edge).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mesh generation or mesh consistency failure.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solver non-convergence or incompatible data.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration / argument validation failure.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace polyeit
