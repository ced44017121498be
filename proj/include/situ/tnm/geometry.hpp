#pragma once

#include "situ/ontology/frame.hpp"

namespace situ::tnm {

// Generalized IoU on raw corner coordinates (no clipping):
//   IoU(a, b) - (area(C) - area(a U b)) / area(C), C the smallest enclosing box.
// Throws NumericError for zero-area boxes.
double giou(const onto::BBox& a, const onto::BBox& b);

}  // namespace situ::tnm
