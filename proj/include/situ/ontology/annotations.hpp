#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/ontology/frame.hpp"
#include "situ/ontology/lexicon.hpp"

namespace situ::onto {

struct AnnotatedImage {
    std::string image_id;
    std::size_t width = 0;
    std::size_t height = 0;
    GroundedFrame frame;

    bool operator==(const AnnotatedImage&) const = default;
};

using AnnotationSet = std::vector<AnnotatedImage>;

struct LoadOptions {
    // Map nouns missing from the lexicon to the reserved blank id instead of
    // failing (used after vocabulary truncation).
    bool unknown_nouns_to_blank = false;
};

// SWiG-like annotation file; see docs/FORMAT.md. Records keep file order.
AnnotationSet annotations_from_json(const nlohmann::ordered_json& j, const Lexicon& lexicon,
                                    const LoadOptions& options = {});
nlohmann::ordered_json annotations_to_json(const AnnotationSet& set, const Lexicon& lexicon);

AnnotationSet load_annotations(const std::filesystem::path& path, const Lexicon& lexicon,
                               const LoadOptions& options = {});
void write_annotations(const std::filesystem::path& path, const AnnotationSet& set, const Lexicon& lexicon);

// Keeps the `keep` most frequent gold nouns (ties by ascending id) and remaps
// every other gold noun to kBlankNoun. Returns the truncated lexicon and the
// remapped annotations.
struct TruncatedVocabulary {
    Lexicon lexicon;
    AnnotationSet annotations;
};
TruncatedVocabulary truncate_noun_vocabulary(const Lexicon& lexicon, const AnnotationSet& set, std::size_t keep);

}  // namespace situ::onto
