#pragma once

#include <optional>
#include <string>
#include <vector>

#include "situ/ontology/lexicon.hpp"

namespace situ::onto {

// Box in coordinates normalized to the image extent. Stored as corners so that
// files written in corner form load back bit-identically; center/size views
// are derived.
struct BBox {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

    static BBox from_corners(double x1, double y1, double x2, double y2) { return {x1, y1, x2, y2}; }
    static BBox from_center(double cx, double cy, double w, double h) {
        return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }

    // Corners clipped to [0, 1]; this is the form used for IoU.
    BBox clipped() const;
    double area() const { return w() * h(); }

    bool operator==(const BBox&) const = default;
};

// Empty when the box satisfies 0 <= cx, cy <= 1 and 0 < w, h <= 1.
std::vector<std::string> box_violations(const BBox& box);

struct RoleEntry {
    RoleId role = 0;
    std::vector<NounId> gold_nouns;  // 1..3 distinct annotator nouns, first is the training target
    std::optional<BBox> box;         // nullopt: role not visibly grounded

    bool operator==(const RoleEntry&) const = default;
};

struct GroundedFrame {
    VerbId verb = 0;
    std::vector<RoleEntry> roles;  // in roles_of(verb) order

    bool operator==(const GroundedFrame&) const = default;
};

// Structural check against the lexicon. Returns human-readable violations
// instead of throwing; an empty result means the frame is well formed.
std::vector<std::string> validate_frame(const GroundedFrame& frame, const Lexicon& lexicon);

}  // namespace situ::onto
