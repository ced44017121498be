#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "situ/ontology/annotations.hpp"
#include "situ/ontology/images.hpp"
#include "situ/ontology/lexicon.hpp"

namespace situ::onto {

// Parameters of the procedural grid world. Images are square, split into
// grid x grid cells; each grounded role of a verb owns one cell and is drawn as
// a textured rectangle ("glyph") whose color and texture encode the noun. An
// optional ungrounded "place" role is encoded by the background color.
struct SynthSpec {
    std::size_t num_verbs = 8;
    std::size_t min_roles = 2;  // grounded roles per verb
    std::size_t max_roles = 3;
    double place_role_prob = 0.5;
    std::size_t num_nouns = 24;  // object nouns
    // Object nouns that no role ever takes; used only for decoy glyphs.
    std::size_t num_clutter_nouns = 4;
    std::size_t num_scene_nouns = 6;
    std::size_t nouns_per_role = 3;  // candidate nouns per (verb, role)
    std::size_t image_size = 24;
    std::size_t grid = 3;
    std::size_t min_glyph = 4;
    std::size_t count = 0;
    // Verb pairs with identical roles and noun distributions whose layouts
    // differ in the cell of exactly one role (adjacent cells).
    std::size_t confusable_pairs = 2;
    double synonym_prob = 0.15;
    // Probability that a grounded role's glyph is not drawn (the role keeps
    // its noun but has no box), like occluded or out-of-frame objects.
    double absent_prob = 0.0;
    // Fraction of images of confusable verbs rendered as planted confusions:
    // besides the verb's own glyphs, the partner verb's distinguishing cell
    // holds a decoy glyph of a clutter noun, so the cell occupancy matches
    // both verbs.
    double hard_fraction = 0.0;
    // Extra decoy glyphs placed in other empty cells of a planted image.
    std::size_t hard_clutter = 0;
};

inline constexpr std::size_t kNoCell = std::numeric_limits<std::size_t>::max();

enum class Texture : std::uint8_t { solid = 0, hstripe = 1, vstripe = 2, checker = 3 };

struct GlyphCode {
    std::array<std::uint8_t, 3> color{};
    Texture texture = Texture::solid;
    bool operator==(const GlyphCode&) const = default;
};

struct VerbLayout {
    std::vector<std::size_t> cells;                 // per role; kNoCell for the scene role
    std::vector<std::vector<NounId>> noun_choices;  // per role
    std::vector<std::vector<double>> noun_weights;  // per role, sums to 1
};

struct SynthWorld {
    SynthSpec spec;
    Lexicon lexicon;
    std::vector<VerbLayout> layouts;                          // per verb
    std::map<NounId, GlyphCode> glyphs;                       // object and clutter nouns
    std::vector<NounId> clutter_nouns;
    std::map<NounId, std::array<std::uint8_t, 3>> backgrounds;  // scene nouns
    std::optional<RoleId> place_role;
    // (verb, partner, role slot whose cell differs)
    struct Confusion {
        VerbId verb;
        VerbId partner;
        std::size_t slot;
    };
    std::vector<Confusion> confusions;

    std::size_t cell_size() const { return spec.image_size / spec.grid; }
};

struct SynthSample {
    Image image;
    AnnotatedImage annotation;
    bool planted_confusion = false;
};

struct SynthDataset {
    SynthWorld world;
    std::vector<SynthSample> samples;
};

// Throws ConfigError when the spec cannot be realized (glyphs cannot fit, not
// enough distinct layouts or glyph codes, ...).
SynthWorld make_world(const SynthSpec& spec, std::uint64_t seed);

// Verbs are assigned round-robin (sample i has verb i mod num_verbs), so any
// contiguous block of num_verbs samples is balanced.
std::vector<SynthSample> render_samples(const SynthWorld& world, std::size_t count, std::uint64_t seed,
                                        const std::string& id_prefix = "img");

// make_world + render_samples(spec.count); deterministic in the seed.
SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

std::array<std::uint8_t, 3> no_place_background();

}  // namespace situ::onto
