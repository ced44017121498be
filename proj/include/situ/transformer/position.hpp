#pragma once

#include "situ/numerics/tensor.hpp"

namespace situ::tf {

// 2-D sine/cosine encodings for an h x w token grid, row index y * w + x. The
// first dim/2 columns encode y and the rest x; within each half, column 2k is
// sin(pos * f_k) and 2k+1 is cos(pos * f_k) with f_k = 10000^(-2k / (dim/2)).
// dim must be a positive multiple of 4.
num::Tensor sinusoidal_pe(std::size_t h, std::size_t w, std::size_t dim);

}  // namespace situ::tf
