#include "situ/metrics/prediction_io.hpp"

#include <fstream>
#include <set>

#include "situ/common/error.hpp"

namespace situ::metrics {

using nlohmann::ordered_json;

ordered_json predictions_to_json(const PredictionDump& dump, const onto::Lexicon& lexicon) {
    ordered_json j;
    j["format"] = kPredictionFormat;
    j["config_hash"] = dump.config_hash;
    auto& preds = j["predictions"] = ordered_json::object();
    for (const auto& p : dump.predictions) {
        ordered_json jp;
        auto& ranked = jp["ranked"] = ordered_json::array();
        for (const auto& r : p.ranked) ranked.push_back({{"verb", lexicon.verb_name(r.verb)}, {"score", r.score}});
        auto& frames = jp["frames"] = ordered_json::object();
        for (const auto& [verb, roles] : p.frames) {
            const auto& role_ids = lexicon.roles_of(verb);
            auto& jf = frames[lexicon.verb_name(verb)] = ordered_json::array();
            for (std::size_t s = 0; s < roles.size(); ++s) {
                const auto& r = roles[s];
                jf.push_back({{"role", lexicon.role_name(role_ids.at(s))},
                              {"noun", lexicon.noun_name(r.noun)},
                              {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}},
                              {"presence", r.presence}});
            }
        }
        preds[p.image_id] = std::move(jp);
    }
    return j;
}

PredictionDump predictions_from_json(const ordered_json& j, const onto::Lexicon& lexicon) {
    try {
        if (j.at("format") != kPredictionFormat) throw SchemaError("not a prediction dump");
        PredictionDump dump;
        dump.config_hash = j.value("config_hash", "");
        for (const auto& [id, jp] : j.at("predictions").items()) {
            Prediction p;
            p.image_id = id;
            std::set<onto::VerbId> seen;
            for (const auto& jr : jp.at("ranked")) {
                RankedVerb r{lexicon.verb_id(jr.at("verb").get<std::string>()), jr.at("score").get<double>()};
                if (!seen.insert(r.verb).second) throw SchemaError("image " + id + ": duplicate ranked verb");
                p.ranked.push_back(r);
            }
            if (p.ranked.empty()) throw SchemaError("image " + id + ": empty ranked list");
            for (const auto& [verb_name, jf] : jp.at("frames").items()) {
                const onto::VerbId v = lexicon.verb_id(verb_name);
                const auto& role_ids = lexicon.roles_of(v);
                if (jf.size() != role_ids.size())
                    throw SchemaError("image " + id + ": frame for " + verb_name + " has the wrong number of roles");
                std::vector<RolePrediction> roles;
                for (std::size_t s = 0; s < jf.size(); ++s) {
                    const auto& jr = jf[s];
                    if (jr.at("role").get<std::string>() != lexicon.role_name(role_ids[s]))
                        throw SchemaError("image " + id + ": frame for " + verb_name + " lists roles out of order");
                    const auto b = jr.at("box").get<std::vector<double>>();
                    if (b.size() != 4) throw SchemaError("image " + id + ": box needs 4 numbers");
                    roles.push_back({lexicon.noun_id(jr.at("noun").get<std::string>()),
                                     BBox::from_corners(b[0], b[1], b[2], b[3]), jr.at("presence").get<bool>()});
                }
                p.frames[v] = std::move(roles);
            }
            dump.predictions.push_back(std::move(p));
        }
        return dump;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("prediction dump: ") + e.what());
    }
}

void write_predictions(const std::filesystem::path& path, const PredictionDump& dump, const onto::Lexicon& lexicon) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << predictions_to_json(dump, lexicon).dump(1) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

PredictionDump read_predictions(const std::filesystem::path& path, const onto::Lexicon& lexicon) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return predictions_from_json(j, lexicon);
}

void require_same_images(const std::vector<Prediction>& predictions, const onto::AnnotationSet& gold) {
    std::set<std::string> pred_ids, gold_ids;
    for (const auto& p : predictions) pred_ids.insert(p.image_id);
    for (const auto& g : gold) gold_ids.insert(g.image_id);
    for (const auto& id : gold_ids)
        if (!pred_ids.count(id)) throw SchemaError("image id mismatch: " + id + " has no prediction");
    for (const auto& id : pred_ids)
        if (!gold_ids.count(id)) throw SchemaError("image id mismatch: prediction for unknown image " + id);
}

}  // namespace situ::metrics
