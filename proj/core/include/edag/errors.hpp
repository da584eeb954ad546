#pragma once

#include <stdexcept>
#include <string>

namespace edag {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or contradictory configuration (files, flags, generator settings).
struct ConfigError : Error {
  using Error::Error;
};

// Records or tags referencing roles/types absent from the schema.
struct SchemaError : Error {
  using Error::Error;
};

// Tensor shape mismatch; message names the primitive and the shapes.
struct ShapeError : Error {
  using Error::Error;
};

// File and serialization failures (missing inputs, corrupt checkpoints).
struct IoError : Error {
  using Error::Error;
};

}  // namespace edag
