#include "situ/ontology/frame.hpp"

#include <algorithm>

namespace situ::onto {

BBox BBox::clipped() const {
    auto c = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {c(x1), c(y1), c(x2), c(y2)};
}

std::vector<std::string> box_violations(const BBox& box) {
    std::vector<std::string> out;
    if (!(box.w() > 0.0) || !(box.h() > 0.0)) {
        out.push_back("degenerate box");
        return out;
    }
    if (box.w() > 1.0 || box.h() > 1.0) out.push_back("box larger than image");
    if (box.cx() < 0.0 || box.cx() > 1.0 || box.cy() < 0.0 || box.cy() > 1.0) out.push_back("box center outside image");
    return out;
}

std::vector<std::string> validate_frame(const GroundedFrame& frame, const Lexicon& lexicon) {
    std::vector<std::string> out;
    if (frame.verb >= lexicon.num_verbs()) {
        out.push_back("unknown verb id " + std::to_string(frame.verb));
        return out;
    }
    const auto& expected = lexicon.roles_of(frame.verb);
    for (std::size_t i = 0; i < frame.roles.size(); ++i) {
        const RoleId r = frame.roles[i].role;
        const bool known = std::find(expected.begin(), expected.end(), r) != expected.end();
        if (!known) {
            out.push_back("role not in verb's set: " + (r < lexicon.num_roles() ? lexicon.role_name(r) : std::to_string(r)));
        } else if (i >= expected.size() || expected[i] != r) {
            out.push_back("role out of order at position " + std::to_string(i));
        }
    }
    for (RoleId r : expected) {
        const bool present = std::any_of(frame.roles.begin(), frame.roles.end(),
                                         [r](const RoleEntry& e) { return e.role == r; });
        if (!present) out.push_back("missing role: " + lexicon.role_name(r));
    }
    for (const auto& e : frame.roles) {
        if (e.gold_nouns.empty()) out.push_back("role without gold nouns");
        if (e.gold_nouns.size() > 3) out.push_back("more than three gold nouns");
        for (NounId n : e.gold_nouns) {
            if (n >= lexicon.num_nouns()) out.push_back("unknown noun id " + std::to_string(n));
        }
        if (e.box) {
            for (auto& v : box_violations(*e.box)) out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace situ::onto
