#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace situ::onto {

using VerbId = std::size_t;
using RoleId = std::size_t;
using NounId = std::size_t;

// Noun id 0 is reserved for "blank / unknown".
inline constexpr NounId kBlankNoun = 0;
inline constexpr const char* kBlankNounName = "blank";
inline constexpr std::size_t kDefaultMaxRoles = 6;

struct VerbEntry {
    std::string name;
    std::vector<RoleId> roles;
};

// Verb catalog with per-verb ordered role lists, plus role and noun
// vocabularies. Role ids are shared across verbs.
class Lexicon {
public:
    explicit Lexicon(std::size_t max_roles = kDefaultMaxRoles);

    RoleId add_role(const std::string& name);
    NounId add_noun(const std::string& name);
    // Adds the verb and any of its roles not yet in the role vocabulary.
    VerbId add_verb(const std::string& name, const std::vector<std::string>& roles);

    std::size_t num_verbs() const { return verbs_.size(); }
    std::size_t num_roles() const { return roles_.size(); }
    std::size_t num_nouns() const { return nouns_.size(); }
    std::size_t max_roles() const { return max_roles_; }

    const VerbEntry& verb(VerbId v) const;
    const std::vector<RoleId>& roles_of(VerbId v) const { return verb(v).roles; }
    const std::string& verb_name(VerbId v) const { return verb(v).name; }
    const std::string& role_name(RoleId r) const;
    const std::string& noun_name(NounId n) const;

    std::optional<VerbId> find_verb(const std::string& name) const;
    std::optional<RoleId> find_role(const std::string& name) const;
    std::optional<NounId> find_noun(const std::string& name) const;
    // Throwing lookups (SchemaError).
    VerbId verb_id(const std::string& name) const;
    RoleId role_id(const std::string& name) const;
    NounId noun_id(const std::string& name) const;

    const std::vector<std::string>& verb_names() const { return verb_names_; }
    const std::vector<std::string>& role_names() const { return roles_; }
    const std::vector<std::string>& noun_names() const { return nouns_; }

    bool operator==(const Lexicon& other) const;

private:
    std::size_t max_roles_;
    std::vector<VerbEntry> verbs_;
    std::vector<std::string> verb_names_;
    std::vector<std::string> roles_;
    std::vector<std::string> nouns_;
    std::map<std::string, VerbId> verb_index_;
    std::map<std::string, RoleId> role_index_;
    std::map<std::string, NounId> noun_index_;
};

nlohmann::ordered_json lexicon_to_json(const Lexicon& lexicon);
Lexicon lexicon_from_json(const nlohmann::ordered_json& j);
void save_lexicon(const std::filesystem::path& path, const Lexicon& lexicon);
Lexicon load_lexicon(const std::filesystem::path& path);

}  // namespace situ::onto
