#include "situ/ontology/lexicon.hpp"

#include <fstream>

#include "situ/common/error.hpp"

namespace situ::onto {

using nlohmann::ordered_json;

Lexicon::Lexicon(std::size_t max_roles) : max_roles_(max_roles) {
    if (max_roles == 0) throw ConfigError("max_roles must be at least 1");
    add_noun(kBlankNounName);
}

RoleId Lexicon::add_role(const std::string& name) {
    if (auto it = role_index_.find(name); it != role_index_.end()) return it->second;
    roles_.push_back(name);
    return role_index_[name] = roles_.size() - 1;
}

NounId Lexicon::add_noun(const std::string& name) {
    if (auto it = noun_index_.find(name); it != noun_index_.end()) return it->second;
    nouns_.push_back(name);
    return noun_index_[name] = nouns_.size() - 1;
}

VerbId Lexicon::add_verb(const std::string& name, const std::vector<std::string>& roles) {
    if (verb_index_.count(name)) throw SchemaError("duplicate verb '" + name + "'");
    if (roles.empty() || roles.size() > max_roles_) {
        throw SchemaError("verb '" + name + "' has " + std::to_string(roles.size()) + " roles; expected 1.." +
                          std::to_string(max_roles_));
    }
    VerbEntry entry{name, {}};
    for (const auto& r : roles) {
        const RoleId id = add_role(r);
        for (RoleId existing : entry.roles) {
            if (existing == id) throw SchemaError("verb '" + name + "' lists role '" + r + "' twice");
        }
        entry.roles.push_back(id);
    }
    verbs_.push_back(std::move(entry));
    verb_names_.push_back(name);
    return verb_index_[name] = verbs_.size() - 1;
}

const VerbEntry& Lexicon::verb(VerbId v) const {
    if (v >= verbs_.size()) throw SchemaError("unknown verb id " + std::to_string(v));
    return verbs_[v];
}

const std::string& Lexicon::role_name(RoleId r) const {
    if (r >= roles_.size()) throw SchemaError("unknown role id " + std::to_string(r));
    return roles_[r];
}

const std::string& Lexicon::noun_name(NounId n) const {
    if (n >= nouns_.size()) throw SchemaError("unknown noun id " + std::to_string(n));
    return nouns_[n];
}

std::optional<VerbId> Lexicon::find_verb(const std::string& name) const {
    auto it = verb_index_.find(name);
    return it == verb_index_.end() ? std::nullopt : std::optional<VerbId>(it->second);
}

std::optional<RoleId> Lexicon::find_role(const std::string& name) const {
    auto it = role_index_.find(name);
    return it == role_index_.end() ? std::nullopt : std::optional<RoleId>(it->second);
}

std::optional<NounId> Lexicon::find_noun(const std::string& name) const {
    if (name.empty()) return kBlankNoun;
    auto it = noun_index_.find(name);
    return it == noun_index_.end() ? std::nullopt : std::optional<NounId>(it->second);
}

VerbId Lexicon::verb_id(const std::string& name) const {
    if (auto v = find_verb(name)) return *v;
    throw SchemaError("unknown verb '" + name + "'");
}

RoleId Lexicon::role_id(const std::string& name) const {
    if (auto r = find_role(name)) return *r;
    throw SchemaError("unknown role '" + name + "'");
}

NounId Lexicon::noun_id(const std::string& name) const {
    if (auto n = find_noun(name)) return *n;
    throw SchemaError("unknown noun '" + name + "'");
}

bool Lexicon::operator==(const Lexicon& other) const {
    if (max_roles_ != other.max_roles_ || roles_ != other.roles_ || nouns_ != other.nouns_) return false;
    if (verbs_.size() != other.verbs_.size()) return false;
    for (std::size_t i = 0; i < verbs_.size(); ++i) {
        if (verbs_[i].name != other.verbs_[i].name || verbs_[i].roles != other.verbs_[i].roles) return false;
    }
    return true;
}

ordered_json lexicon_to_json(const Lexicon& lexicon) {
    ordered_json j;
    j["format"] = "situ-lexicon-v1";
    j["max_roles"] = lexicon.max_roles();
    j["roles"] = lexicon.role_names();
    j["nouns"] = lexicon.noun_names();
    ordered_json verbs = ordered_json::object();
    for (VerbId v = 0; v < lexicon.num_verbs(); ++v) {
        std::vector<std::string> roles;
        for (RoleId r : lexicon.roles_of(v)) roles.push_back(lexicon.role_name(r));
        verbs[lexicon.verb_name(v)] = roles;
    }
    j["verbs"] = std::move(verbs);
    return j;
}

Lexicon lexicon_from_json(const ordered_json& j) {
    try {
        if (j.value("format", "") != "situ-lexicon-v1") throw SchemaError("lexicon: missing or unknown format tag");
        Lexicon lex(j.value("max_roles", kDefaultMaxRoles));
        if (j.contains("roles")) {
            for (const auto& r : j.at("roles")) lex.add_role(r.get<std::string>());
        }
        const auto nouns = j.at("nouns").get<std::vector<std::string>>();
        if (nouns.empty() || nouns.front() != kBlankNounName) {
            throw SchemaError("lexicon: noun list must start with the reserved '" + std::string(kBlankNounName) + "'");
        }
        for (const auto& n : nouns) lex.add_noun(n);
        for (const auto& [verb, roles] : j.at("verbs").items()) {
            lex.add_verb(verb, roles.get<std::vector<std::string>>());
        }
        return lex;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("lexicon: ") + e.what());
    }
}

void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << lexicon_to_json(lexicon).dump(2) << '\n';
}

Lexicon load_lexicon(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return lexicon_from_json(ordered_json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

}  // namespace situ::onto
