#pragma once

#include <stdexcept>
#include <string>

namespace latformer {

// Action or shape arguments outside the supported lattice families
// (rotation on non-square dims, dimension mismatch, ...).
struct InvalidShape : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Scaling factor below 2.
struct InvalidFactor : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Kronecker product would exceed the configured mask size limit.
struct SizeOverflow : std::length_error {
  using std::length_error::length_error;
};

// A pre-round mask entry landed inside the guard band around the
// rounding threshold on the Fourier route.
struct NumericalInstability : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A masked attention row has (numerically) zero total weight.
struct DegenerateRow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A loss or parameter became NaN/inf; signals training divergence.
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Task generation asked for more grids than the pool provides.
struct EmptyPool : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed task/ARC file.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structurally valid file with out-of-contract contents (bad colors,
// ragged grids, ...). The message names the offending grid.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad experiment configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace latformer
