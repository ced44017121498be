#include <filesystem>
#include <map>
#include <set>

#include <doctest.h>

#include "situ/common/error.hpp"
#include "situ/ontology/annotations.hpp"
#include "situ/ontology/images.hpp"
#include "situ/ontology/synth.hpp"

using namespace situ;
using namespace situ::onto;

namespace {

const std::filesystem::path kData = std::filesystem::path(SITU_TEST_DATA) / "annotations";

// Reads a synthetic image back into a frame using only the world's planting
// rules: a cell holds a glyph iff it has non-background pixels, the glyph is
// identified by exact template match against every glyph code, the verb is the
// one whose layout occupies exactly the observed cells, and the place noun is
// the scene whose color fills the background.
struct Decoded {
    std::optional<VerbId> verb;
    std::map<std::size_t, NounId> cell_nouns;
    std::optional<NounId> place;
};

std::array<std::uint8_t, 3> pixel(const Image& img, std::size_t y, std::size_t x) {
    return {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
}

std::optional<NounId> match_glyph(const SynthWorld& world, const Image& img, std::size_t x0, std::size_t y0,
                                  std::size_t x1, std::size_t y1) {
    std::optional<NounId> found;
    for (const auto& [noun, code] : world.glyphs) {
        bool ok = true;
        for (std::size_t y = y0; y < y1 && ok; ++y) {
            for (std::size_t x = x0; x < x1 && ok; ++x) {
                const std::size_t dx = x - x0, dy = y - y0;
                bool dim = code.texture == Texture::hstripe ? dy % 2 == 1
                         : code.texture == Texture::vstripe ? dx % 2 == 1
                         : code.texture == Texture::checker ? (dx + dy) % 2 == 1
                                                            : false;
                for (std::size_t c = 0; c < 3; ++c) {
                    const std::uint8_t want = dim ? code.color[c] / 2 : code.color[c];
                    ok = ok && img.at(y, x, c) == want;
                }
            }
        }
        if (ok) {
            if (found) return std::nullopt;  // ambiguous
            found = noun;
        }
    }
    return found;
}

Decoded decode_by_rules(const SynthWorld& world, const Image& img) {
    const std::size_t cell = world.cell_size(), grid = world.spec.grid;
    // Background is the most frequent color.
    std::map<std::array<std::uint8_t, 3>, std::size_t> freq;
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x) ++freq[pixel(img, y, x)];
    auto bg = std::max_element(freq.begin(), freq.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;

    Decoded d;
    for (const auto& [noun, color] : world.backgrounds)
        if (color == bg) d.place = noun;
    std::set<std::size_t> occupied;
    for (std::size_t cr = 0; cr < grid; ++cr) {
        for (std::size_t cc = 0; cc < grid; ++cc) {
            std::size_t x0 = SIZE_MAX, y0 = SIZE_MAX, x1 = 0, y1 = 0;
            for (std::size_t y = cr * cell; y < (cr + 1) * cell; ++y)
                for (std::size_t x = cc * cell; x < (cc + 1) * cell; ++x)
                    if (pixel(img, y, x) != bg) {
                        x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x + 1), y1 = std::max(y1, y + 1);
                    }
            if (x0 == SIZE_MAX) continue;
            const std::size_t c = cr * grid + cc;
            occupied.insert(c);
            if (auto n = match_glyph(world, img, x0, y0, x1, y1)) d.cell_nouns[c] = *n;
        }
    }
    for (VerbId v = 0; v < world.layouts.size(); ++v) {
        std::set<std::size_t> cells;
        for (auto c : world.layouts[v].cells)
            if (c != kNoCell) cells.insert(c);
        if (cells == occupied) d.verb = v;
    }
    return d;
}

}  // namespace

TEST_SUITE("ontology") {

TEST_CASE("lexicon shares role ids across verbs and round-trips through JSON") {
    Lexicon lex;
    CHECK(lex.num_nouns() == 1);
    CHECK(lex.noun_name(kBlankNoun) == "blank");
    lex.add_noun("man");
    const auto buy = lex.add_verb("buying", {"agent", "goods", "place"});
    const auto browse = lex.add_verb("browsing", {"agent", "place"});
    CHECK(lex.roles_of(buy)[0] == lex.roles_of(browse)[0]);
    CHECK(lex.num_roles() == 3);
    CHECK_THROWS_AS(lex.add_verb("buying", {"agent"}), SchemaError);
    CHECK_THROWS_AS(lex.add_verb("crowded", {"a", "b", "c", "d", "e", "f", "g"}), SchemaError);
    CHECK_THROWS_AS(lex.add_verb("twice", {"agent", "agent"}), SchemaError);
    CHECK(lexicon_from_json(lexicon_to_json(lex)) == lex);
    auto j = lexicon_to_json(lex);
    j["format"] = "other";
    CHECK_THROWS_AS(lexicon_from_json(j), SchemaError);
}

TEST_CASE("validate_frame reports each kind of violation") {
    const auto lex = load_lexicon(kData / "lexicon.json");
    const auto browse = lex.verb_id("browsing");
    const auto agent = lex.role_id("agent"), goods = lex.role_id("goods"), place = lex.role_id("place");
    GroundedFrame ok{browse, {{agent, {1}, BBox::from_corners(0.1, 0.1, 0.5, 0.5)}, {goods, {3}, std::nullopt}, {place, {6}, std::nullopt}}};
    CHECK(validate_frame(ok, lex).empty());

    auto swapped = ok;
    std::swap(swapped.roles[0], swapped.roles[1]);
    CHECK_FALSE(validate_frame(swapped, lex).empty());

    auto missing = ok;
    missing.roles.pop_back();
    CHECK(validate_frame(missing, lex).size() == 1);

    auto no_nouns = ok;
    no_nouns.roles[1].gold_nouns.clear();
    CHECK(validate_frame(no_nouns, lex) == std::vector<std::string>{"role without gold nouns"});

    auto bad_box = ok;
    bad_box.roles[0].box = BBox::from_corners(0.5, 0.5, 0.5, 0.9);
    CHECK(validate_frame(bad_box, lex) == std::vector<std::string>{"degenerate box"});
    bad_box.roles[0].box = BBox::from_center(1.2, 0.5, 0.2, 0.2);
    CHECK(validate_frame(bad_box, lex) == std::vector<std::string>{"box center outside image"});

    auto foreign = ok;
    foreign.roles[1].role = lex.role_id("payment");
    CHECK(validate_frame(foreign, lex).size() == 2);
}

TEST_CASE("the annotation sample parses to the hand-written frames") {
    const auto lex = load_lexicon(kData / "lexicon.json");
    const auto set = load_annotations(kData / "sample.json", lex);
    REQUIRE(set.size() == 2);

    const auto& buy = set[0];
    CHECK(buy.image_id == "buying_001");
    CHECK(buy.width == 640);
    CHECK(buy.height == 480);
    CHECK(buy.frame.verb == lex.verb_id("buying"));
    REQUIRE(buy.frame.roles.size() == 4);
    // Annotator nouns are merged in first-seen order.
    CHECK(buy.frame.roles[0].gold_nouns == std::vector<NounId>{lex.noun_id("man"), lex.noun_id("woman")});
    CHECK(buy.frame.roles[1].gold_nouns == std::vector<NounId>{lex.noun_id("book")});
    CHECK(buy.frame.roles[2].gold_nouns == std::vector<NounId>{lex.noun_id("cash"), lex.noun_id("card")});
    CHECK(buy.frame.roles[0].box == BBox::from_corners(0.1, 0.2, 0.5, 0.9));
    CHECK(buy.frame.roles[1].box == BBox::from_corners(0.55, 0.4, 0.7, 0.6));
    // The [-1, -1, -1, -1] sentinel means no grounding.
    CHECK_FALSE(buy.frame.roles[2].box.has_value());
    CHECK_FALSE(buy.frame.roles[3].box.has_value());

    const auto& browse = set[1];
    CHECK(browse.frame.verb == lex.verb_id("browsing"));
    CHECK(browse.frame.roles[0].box == BBox::from_corners(0.0, 0.0, 0.25, 1.0));
    // A role absent from "bb" is ungrounded as well.
    CHECK_FALSE(browse.frame.roles[2].box.has_value());
    for (const auto& a : set) CHECK(validate_frame(a.frame, lex).empty());
}

TEST_CASE("annotations survive a write and reload unchanged") {
    const auto lex = load_lexicon(kData / "lexicon.json");
    const auto set = load_annotations(kData / "sample.json", lex);
    const auto path = std::filesystem::temp_directory_path() / "situ_annotations_roundtrip.json";
    write_annotations(path, set, lex);
    CHECK(load_annotations(path, lex) == set);
    std::filesystem::remove(path);
}

TEST_CASE("malformed annotation files are schema errors") {
    const auto lex = load_lexicon(kData / "lexicon.json");
    CHECK_THROWS_AS(load_annotations(kData / "bad_roles.json", lex), SchemaError);
    CHECK_THROWS_AS(load_annotations(kData / "bad_noun.json", lex), SchemaError);
    CHECK_THROWS_AS(load_annotations(kData / "bad_verb.json", lex), SchemaError);
    CHECK_THROWS_AS(load_annotations(kData / "does_not_exist.json", lex), IoError);
    const auto blanked = load_annotations(kData / "bad_noun.json", lex, {.unknown_nouns_to_blank = true});
    CHECK(blanked[0].frame.roles[0].gold_nouns == std::vector<NounId>{kBlankNoun});
}

TEST_CASE("vocabulary truncation keeps the most frequent nouns and blanks the rest") {
    const auto lex = load_lexicon(kData / "lexicon.json");
    const auto set = load_annotations(kData / "sample.json", lex);
    // Counts: book 2, store 2, woman 2, man 1, cash 1, card 1.
    const auto t = truncate_noun_vocabulary(lex, set, 3);
    CHECK(t.lexicon.num_nouns() == 4);
    CHECK(t.lexicon.find_noun("book"));
    CHECK(t.lexicon.find_noun("woman"));
    CHECK(t.lexicon.find_noun("store"));
    CHECK_FALSE(t.lexicon.find_noun("man"));
    const auto& payment = t.annotations[0].frame.roles[2];
    CHECK(payment.gold_nouns == std::vector<NounId>{kBlankNoun});
}

TEST_CASE("image bundles round-trip and reject foreign files") {
    const auto ds = synth_generate({.count = 5}, 3);
    std::vector<Image> images;
    for (const auto& s : ds.samples) images.push_back(s.image);
    const auto path = std::filesystem::temp_directory_path() / "situ_images_roundtrip.bin";
    write_images(path, images);
    CHECK(read_images(path) == images);
    CHECK_THROWS_AS(read_images(kData / "sample.json"), SchemaError);
    std::filesystem::remove(path);
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    SynthSpec spec;
    spec.count = 40;
    const auto a = synth_generate(spec, 17), b = synth_generate(spec, 17), c = synth_generate(spec, 18);
    bool all_same = true, any_diff = false;
    for (std::size_t i = 0; i < spec.count; ++i) {
        all_same = all_same && a.samples[i].image == b.samples[i].image && a.samples[i].annotation == b.samples[i].annotation;
        any_diff = any_diff || !(a.samples[i].image == c.samples[i].image);
    }
    CHECK(all_same);
    CHECK(any_diff);
}

TEST_CASE("synthetic frames are valid and verbs are balanced") {
    SynthSpec spec;
    spec.count = 80;
    spec.absent_prob = 0.3;
    const auto ds = synth_generate(spec, 4);
    std::map<VerbId, std::size_t> per_verb;
    std::size_t absent = 0;
    for (const auto& s : ds.samples) {
        CHECK(validate_frame(s.annotation.frame, ds.world.lexicon).empty());
        ++per_verb[s.annotation.frame.verb];
        for (const auto& r : s.annotation.frame.roles) absent += r.box ? 0 : 1;
    }
    for (const auto& [v, n] : per_verb) CHECK(n == 10);
    CHECK(absent > 0);
    // Confusable pairs share roles and differ in exactly one cell.
    REQUIRE(ds.world.confusions.size() == 2 * spec.confusable_pairs);
    for (const auto& c : ds.world.confusions) {
        CHECK(ds.world.lexicon.roles_of(c.verb) == ds.world.lexicon.roles_of(c.partner));
        std::size_t differing = 0;
        for (std::size_t s = 0; s < ds.world.layouts[c.verb].cells.size(); ++s)
            differing += ds.world.layouts[c.verb].cells[s] != ds.world.layouts[c.partner].cells[s];
        CHECK(differing == 1);
    }
}

TEST_CASE("a pixel-rule decoder recovers the verb and every noun of 8 verbs x 200 images") {
    SynthSpec spec;
    spec.count = 1600;
    const auto ds = synth_generate(spec, 21);
    std::size_t verbs_ok = 0, nouns_ok = 0, nouns_total = 0;
    for (const auto& s : ds.samples) {
        const auto d = decode_by_rules(ds.world, s.image);
        const auto& frame = s.annotation.frame;
        verbs_ok += d.verb == frame.verb;
        const auto& layout = ds.world.layouts[frame.verb];
        for (std::size_t r = 0; r < frame.roles.size(); ++r) {
            ++nouns_total;
            const NounId gold = frame.roles[r].gold_nouns.front();
            if (layout.cells[r] == kNoCell) {
                nouns_ok += d.place == gold;
            } else {
                auto it = d.cell_nouns.find(layout.cells[r]);
                nouns_ok += it != d.cell_nouns.end() && it->second == gold;
            }
        }
    }
    CHECK(verbs_ok == ds.samples.size());
    CHECK(nouns_ok == nouns_total);
}

TEST_CASE("planted confusions draw a clutter decoy in the partner's cell") {
    SynthSpec spec;
    spec.count = 64;
    spec.hard_fraction = 1.0;
    const auto ds = synth_generate(spec, 5);
    std::size_t planted = 0;
    for (const auto& s : ds.samples) {
        if (!s.planted_confusion) continue;
        ++planted;
        const auto d = decode_by_rules(ds.world, s.image);
        // Occupancy now matches neither layout exactly, and the extra cell holds a clutter noun.
        CHECK_FALSE(d.verb.has_value());
        const SynthWorld::Confusion* conf = nullptr;
        for (const auto& c : ds.world.confusions)
            if (c.verb == s.annotation.frame.verb) conf = &c;
        REQUIRE(conf != nullptr);
        const auto cell = ds.world.layouts[conf->partner].cells[conf->slot];
        REQUIRE(d.cell_nouns.count(cell));
        const auto& clutter = ds.world.clutter_nouns;
        CHECK(std::find(clutter.begin(), clutter.end(), d.cell_nouns.at(cell)) != clutter.end());
    }
    CHECK(planted == 32);
}

TEST_CASE("unrealizable synthetic specs are config errors") {
    CHECK_THROWS_AS(make_world({.min_glyph = 8}, 1), ConfigError);
    CHECK_THROWS_AS(make_world({.image_size = 25}, 1), ConfigError);
    CHECK_THROWS_AS(make_world({.num_verbs = 3, .confusable_pairs = 2}, 1), ConfigError);
    CHECK_THROWS_AS(make_world({.num_nouns = 200}, 1), ConfigError);
}

}  // TEST_SUITE
