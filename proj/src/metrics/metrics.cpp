#include "situ/metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "situ/common/error.hpp"

namespace situ::metrics {

double iou(const BBox& a, const BBox& b) {
    if (!(a.area() > 0.0) || !(b.area() > 0.0)) throw NumericError("iou: degenerate box");
    const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

const char* setting_name(Setting s) {
    switch (s) {
        case Setting::top1: return "top1";
        case Setting::top5: return "top5";
        case Setting::gt_verb: return "gt_verb";
    }
    return "?";
}

Setting parse_setting(const std::string& name) {
    if (name == "top1") return Setting::top1;
    if (name == "top5") return Setting::top5;
    if (name == "gt_verb") return Setting::gt_verb;
    throw ConfigError("unknown setting '" + name + "' (expected top1, top5 or gt_verb)");
}

const char* null_grounding_name(NullGrounding g) {
    return g == NullGrounding::presence_false ? "presence_false" : "exclude";
}

NullGrounding parse_null_grounding(const std::string& name) {
    if (name == "presence_false") return NullGrounding::presence_false;
    if (name == "exclude") return NullGrounding::exclude;
    throw ConfigError("unknown null_grounding '" + name + "' (expected presence_false or exclude)");
}

RoleScore score_role(onto::NounId noun, const BBox& box, bool presence, const std::vector<onto::NounId>& gold_nouns,
                     const std::optional<BBox>& gold_box) {
    RoleScore s;
    s.noun_ok = std::find(gold_nouns.begin(), gold_nouns.end(), noun) != gold_nouns.end();
    if (!s.noun_ok) return s;
    if (gold_box) {
        s.grounded_ok = presence && iou(box.clipped(), gold_box->clipped()) >= kIouThreshold;
    } else {
        s.grounded_ok = !presence;
    }
    return s;
}

namespace {

bool verb_credited(const Prediction& p, onto::VerbId gold, Setting setting) {
    if (setting == Setting::gt_verb) return true;
    const std::size_t k = setting == Setting::top1 ? 1 : 5;
    for (std::size_t i = 0; i < std::min(k, p.ranked.size()); ++i)
        if (p.ranked[i].verb == gold) return true;
    return false;
}

}  // namespace

MetricReport evaluate(const std::vector<Prediction>& predictions, const onto::AnnotationSet& gold,
                      const onto::Lexicon& lexicon, Setting setting, NullGrounding null_grounding) {
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id[p.image_id] = &p;
    MetricReport r;
    r.setting = setting;
    r.null_grounding = null_grounding;
    for (const auto& g : gold) {
        auto it = by_id.find(g.image_id);
        if (it == by_id.end()) throw SchemaError("no prediction for image " + g.image_id);
        const Prediction& p = *it->second;
        const auto& frame = g.frame;
        const bool credited = verb_credited(p, frame.verb, setting);
        r.verb.den += 1;
        r.verb.num += credited ? 1 : 0;

        const std::vector<RolePrediction>* roles = nullptr;
        if (credited) {
            auto f = p.frames.find(frame.verb);
            if (f == p.frames.end())
                throw SchemaError("prediction for " + g.image_id + " has no frame for its credited verb " +
                                  lexicon.verb_name(frame.verb));
            if (f->second.size() != frame.roles.size())
                throw SchemaError("prediction for " + g.image_id + " has the wrong number of roles");
            roles = &f->second;
        }
        bool all_value = true, all_grnd = true;
        for (std::size_t s = 0; s < frame.roles.size(); ++s) {
            const auto& gr = frame.roles[s];
            RoleScore sc;
            if (roles) {
                const auto& pr = (*roles)[s];
                sc = score_role(pr.noun, pr.box, pr.presence, gr.gold_nouns, gr.box);
            }
            r.value.den += 1;
            r.value.num += sc.noun_ok ? 1 : 0;
            all_value = all_value && sc.noun_ok;
            const bool counts = gr.box.has_value() || null_grounding == NullGrounding::presence_false;
            if (counts) {
                r.grnd.den += 1;
                r.grnd.num += sc.grounded_ok ? 1 : 0;
                all_grnd = all_grnd && sc.grounded_ok;
            } else {
                // Excluded from grnd, but a frame still needs the noun right.
                all_grnd = all_grnd && sc.noun_ok;
            }
        }
        r.value_all.den += 1;
        r.value_all.num += all_value ? 1 : 0;
        r.grnd_all.den += 1;
        r.grnd_all.num += all_grnd ? 1 : 0;
    }
    if (r.verb.den == 0) throw PreconditionError("evaluate: empty gold set");
    return r;
}

namespace {

nlohmann::ordered_json ratio_json(const Ratio& r) { return {{"num", r.num}, {"den", r.den}}; }

Ratio ratio_from(const nlohmann::ordered_json& j) { return {j.at("num").get<std::size_t>(), j.at("den").get<std::size_t>()}; }

}  // namespace

nlohmann::ordered_json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["format"] = "situ-metrics-v1";
    j["setting"] = setting_name(r.setting);
    j["null_grounding"] = null_grounding_name(r.null_grounding);
    j["verb"] = r.verb.value();
    j["value"] = r.value.value();
    j["value_all"] = r.value_all.value();
    j["grnd"] = r.grnd.value();
    j["grnd_all"] = r.grnd_all.value();
    j["counts"] = {{"verb", ratio_json(r.verb)},
                   {"value", ratio_json(r.value)},
                   {"value_all", ratio_json(r.value_all)},
                   {"grnd", ratio_json(r.grnd)},
                   {"grnd_all", ratio_json(r.grnd_all)}};
    return j;
}

MetricReport report_from_json(const nlohmann::ordered_json& j) {
    try {
        MetricReport r;
        r.setting = parse_setting(j.at("setting").get<std::string>());
        r.null_grounding = parse_null_grounding(j.at("null_grounding").get<std::string>());
        const auto& c = j.at("counts");
        r.verb = ratio_from(c.at("verb"));
        r.value = ratio_from(c.at("value"));
        r.value_all = ratio_from(c.at("value_all"));
        r.grnd = ratio_from(c.at("grnd"));
        r.grnd_all = ratio_from(c.at("grnd_all"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("metric report: ") + e.what());
    }
}

std::string format_table(const std::vector<MetricReport>& reports) {
    std::string out = "setting    verb    value   val-all grnd    grnd-all\n";
    char line[128];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line), "%-10s %6.2f  %6.2f  %6.2f  %6.2f  %6.2f\n", setting_name(r.setting),
                      100 * r.verb.value(), 100 * r.value.value(), 100 * r.value_all.value(), 100 * r.grnd.value(),
                      100 * r.grnd_all.value());
        out += line;
    }
    return out;
}

}  // namespace situ::metrics
