#pragma once

#include <vector>

#include "situ/ontology/frame.hpp"
#include "situ/tnm/model.hpp"

namespace situ::tnm {

struct LossWeights {
    double giou = 2.0;
    double l1 = 5.0;
    double presence = 1.0;
    // Drops the presence term; predicted boxes are then always treated as
    // present.
    bool always_present = false;
};

struct RoleLoss {
    double noun = 0.0;
    double giou = 0.0;  // weighted (1 - GIoU), 0 without a gold box
    double l1 = 0.0;    // weighted L1 in (cx, cy, w, h), 0 without a gold box
    double presence = 0.0;
    double total = 0.0;
};

struct TnmLoss {
    Tensor total;  // [1], on the tape when the outputs are
    std::vector<RoleLoss> per_role;
};

// Sum over roles of: cross-entropy on the first gold noun, plus box terms
// for roles with a gold box, plus the presence BCE unless always_present. `include`
// (empty = all) restricts the sum to selected roles.
TnmLoss tnm_loss(const TnmOutput& out, const onto::GroundedFrame& gold, const LossWeights& weights,
                 const std::vector<bool>& include = {});

// Differentiable GIoU of predicted (cx, cy, w, h) rows [k x 4] against
// constant gold corner boxes; returns [k x 1].
Tensor giou_rows(const Tensor& pred_cxcywh, const std::vector<onto::BBox>& gold);

}  // namespace situ::tnm
