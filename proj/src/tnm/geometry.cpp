#include "situ/tnm/geometry.hpp"

#include <algorithm>

#include "situ/common/error.hpp"

namespace situ::tnm {

double giou(const onto::BBox& a, const onto::BBox& b) {
    if (!(a.area() > 0.0) || !(b.area() > 0.0)) throw NumericError("giou: degenerate box");
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    const double enclosure = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
    return inter / uni - (enclosure - uni) / enclosure;
}

}  // namespace situ::tnm
