#pragma once

#include <string>

#include "latformer/matrix.hpp"

namespace latformer {

// Portable graymap (P2): white is 1, black is 0.
void write_mask_pgm(const Matrix& m, const std::string& path);

// Nested-array JSON dump of the mask values.
void write_mask_json(const Matrix& m, const std::string& path);

// Dispatches on the file extension (.pgm or .json).
void write_mask(const Matrix& m, const std::string& path);

}  // namespace latformer
