#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/ontology/annotations.hpp"

namespace situ::metrics {

using onto::BBox;

inline constexpr double kIouThreshold = 0.5;

// Intersection over union in corner form. Throws NumericError for zero-area boxes.
double iou(const BBox& a, const BBox& b);

struct RolePrediction {
    onto::NounId noun = 0;
    BBox box;
    bool presence = true;
    bool operator==(const RolePrediction&) const = default;
};

struct RankedVerb {
    onto::VerbId verb = 0;
    double score = 0.0;
    bool operator==(const RankedVerb&) const = default;
};

struct Prediction {
    std::string image_id;
    std::vector<RankedVerb> ranked;                             // final order
    std::map<onto::VerbId, std::vector<RolePrediction>> frames;  // per candidate verb, in roles_of order
    bool operator==(const Prediction&) const = default;
};

enum class Setting { top1, top5, gt_verb };
// How roles without a gold box count toward grounding: grounded-correct iff
// the predicted presence is false, or left out of the grnd denominators.
enum class NullGrounding { presence_false, exclude };

const char* setting_name(Setting s);
Setting parse_setting(const std::string& name);
const char* null_grounding_name(NullGrounding g);
NullGrounding parse_null_grounding(const std::string& name);

struct RoleScore {
    bool noun_ok = false;
    bool grounded_ok = false;
};

// noun_ok iff the noun is one of the gold nouns; grounded_ok iff noun_ok and
// either (gold box, presence, IoU >= 0.5 on clipped boxes) or (no gold box, no presence).
RoleScore score_role(onto::NounId noun, const BBox& box, bool presence, const std::vector<onto::NounId>& gold_nouns,
                     const std::optional<BBox>& gold_box);

struct Ratio {
    std::size_t num = 0;
    std::size_t den = 0;
    double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Ratio&) const = default;
};

struct MetricReport {
    Setting setting = Setting::top1;
    NullGrounding null_grounding = NullGrounding::presence_false;
    Ratio verb, value, value_all, grnd, grnd_all;
    bool operator==(const MetricReport&) const = default;
};

// Every gold image needs a prediction (SchemaError otherwise). Slots are the
// gold frame's roles; a frame whose verb is not credited in the setting
// scores every slot wrong.
MetricReport evaluate(const std::vector<Prediction>& predictions, const onto::AnnotationSet& gold,
                      const onto::Lexicon& lexicon, Setting setting,
                      NullGrounding null_grounding = NullGrounding::presence_false);

nlohmann::ordered_json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::ordered_json& j);
// Table in the column layout "verb value val-all grnd grnd-all", percentages.
std::string format_table(const std::vector<MetricReport>& reports);

}  // namespace situ::metrics
