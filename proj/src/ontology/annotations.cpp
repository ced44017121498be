#include "situ/ontology/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "situ/common/error.hpp"

namespace situ::onto {

using nlohmann::ordered_json;

namespace {

bool is_null_box(const ordered_json& bb) {
    if (bb.is_null()) return true;
    const auto v = bb.get<std::vector<double>>();
    if (v.size() != 4) throw SchemaError("box must have four coordinates");
    return std::all_of(v.begin(), v.end(), [](double x) { return x == -1.0; });
}

std::set<std::string> keys_of(const ordered_json& obj) {
    std::set<std::string> keys;
    for (const auto& [k, _] : obj.items()) keys.insert(k);
    return keys;
}

AnnotatedImage parse_record(const std::string& image_id, const ordered_json& rec, const Lexicon& lexicon,
                            const LoadOptions& options) {
    AnnotatedImage out;
    out.image_id = image_id;
    out.width = rec.value("width", std::size_t{0});
    out.height = rec.value("height", std::size_t{0});
    const std::string verb_name = rec.at("verb").get<std::string>();
    const auto verb = lexicon.find_verb(verb_name);
    if (!verb) throw SchemaError(image_id + ": unknown verb '" + verb_name + "'");
    out.frame.verb = *verb;
    const auto& roles = lexicon.roles_of(*verb);

    std::set<std::string> expected;
    for (RoleId r : roles) expected.insert(lexicon.role_name(r));

    const auto& frames = rec.at("frames");
    if (!frames.is_array() || frames.empty() || frames.size() > 3) {
        throw SchemaError(image_id + ": expected 1..3 annotator frames");
    }
    for (const auto& f : frames) {
        if (keys_of(f) != expected) throw SchemaError(image_id + ": frame role set does not match the lexicon");
    }

    const ordered_json empty = ordered_json::object();
    const auto& bb = rec.contains("bb") ? rec.at("bb") : empty;
    for (const auto& [role_name, _] : bb.items()) {
        if (!expected.count(role_name)) throw SchemaError(image_id + ": box for role '" + role_name + "' not in verb");
    }

    for (RoleId r : roles) {
        RoleEntry entry;
        entry.role = r;
        const std::string& rname = lexicon.role_name(r);
        for (const auto& f : frames) {
            const std::string noun_name = f.at(rname).at("noun").get<std::string>();
            auto noun = lexicon.find_noun(noun_name);
            if (!noun) {
                if (!options.unknown_nouns_to_blank) throw SchemaError(image_id + ": unknown noun '" + noun_name + "'");
                noun = kBlankNoun;
            }
            if (std::find(entry.gold_nouns.begin(), entry.gold_nouns.end(), *noun) == entry.gold_nouns.end()) {
                entry.gold_nouns.push_back(*noun);
            }
        }
        if (bb.contains(rname) && !is_null_box(bb.at(rname))) {
            const auto v = bb.at(rname).get<std::vector<double>>();
            entry.box = BBox::from_corners(v[0], v[1], v[2], v[3]);
        }
        out.frame.roles.push_back(std::move(entry));
    }
    return out;
}

}  // namespace

AnnotationSet annotations_from_json(const ordered_json& j, const Lexicon& lexicon, const LoadOptions& options) {
    if (!j.is_object()) throw SchemaError("annotation file must be a JSON object keyed by image id");
    AnnotationSet set;
    for (const auto& [image_id, rec] : j.items()) {
        try {
            set.push_back(parse_record(image_id, rec, lexicon, options));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(image_id + ": " + e.what());
        }
    }
    return set;
}

ordered_json annotations_to_json(const AnnotationSet& set, const Lexicon& lexicon) {
    ordered_json j = ordered_json::object();
    for (const auto& img : set) {
        const auto& frame = img.frame;
        ordered_json rec;
        rec["verb"] = lexicon.verb_name(frame.verb);
        rec["width"] = img.width;
        rec["height"] = img.height;
        ordered_json frames = ordered_json::array();
        for (std::size_t a = 0; a < 3; ++a) {
            ordered_json f = ordered_json::object();
            for (const auto& e : frame.roles) {
                const NounId n = e.gold_nouns[std::min(a, e.gold_nouns.size() - 1)];
                f[lexicon.role_name(e.role)] = {{"noun", lexicon.noun_name(n)}};
            }
            frames.push_back(std::move(f));
        }
        rec["frames"] = std::move(frames);
        ordered_json bb = ordered_json::object();
        for (const auto& e : frame.roles) {
            if (e.box) {
                bb[lexicon.role_name(e.role)] = {e.box->x1, e.box->y1, e.box->x2, e.box->y2};
            } else {
                bb[lexicon.role_name(e.role)] = {-1.0, -1.0, -1.0, -1.0};
            }
        }
        rec["bb"] = std::move(bb);
        j[img.image_id] = std::move(rec);
    }
    return j;
}

AnnotationSet load_annotations(const std::filesystem::path& path, const Lexicon& lexicon, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return annotations_from_json(j, lexicon, options);
}

void write_annotations(const std::filesystem::path& path, const AnnotationSet& set, const Lexicon& lexicon) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << annotations_to_json(set, lexicon).dump(1) << '\n';
}

TruncatedVocabulary truncate_noun_vocabulary(const Lexicon& lexicon, const AnnotationSet& set, std::size_t keep) {
    std::map<NounId, std::size_t> counts;
    for (const auto& img : set) {
        for (const auto& e : img.frame.roles) {
            for (NounId n : e.gold_nouns) {
                if (n != kBlankNoun) ++counts[n];
            }
        }
    }
    std::vector<std::pair<NounId, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > keep) ranked.resize(keep);
    std::vector<NounId> kept;
    for (const auto& [n, _] : ranked) kept.push_back(n);
    std::sort(kept.begin(), kept.end());

    Lexicon out(lexicon.max_roles());
    for (const auto& r : lexicon.role_names()) out.add_role(r);
    std::map<NounId, NounId> remap{{kBlankNoun, kBlankNoun}};
    for (NounId n : kept) remap[n] = out.add_noun(lexicon.noun_name(n));
    for (VerbId v = 0; v < lexicon.num_verbs(); ++v) {
        std::vector<std::string> roles;
        for (RoleId r : lexicon.roles_of(v)) roles.push_back(lexicon.role_name(r));
        out.add_verb(lexicon.verb_name(v), roles);
    }

    AnnotationSet remapped = set;
    for (auto& img : remapped) {
        for (auto& e : img.frame.roles) {
            std::vector<NounId> nouns;
            for (NounId n : e.gold_nouns) {
                auto it = remap.find(n);
                const NounId mapped = it == remap.end() ? kBlankNoun : it->second;
                if (std::find(nouns.begin(), nouns.end(), mapped) == nouns.end()) nouns.push_back(mapped);
            }
            e.gold_nouns = std::move(nouns);
        }
    }
    return {std::move(out), std::move(remapped)};
}

}  // namespace situ::onto
