#include "situ/ontology/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>

#include "situ/common/error.hpp"
#include "situ/common/rng.hpp"

namespace situ::onto {
namespace {

const std::vector<std::string> kObjectRoles = {"agent", "item",   "tool",    "target",
                                               "source", "destination", "vehicle", "coagent"};
constexpr const char* kPlaceRole = "place";

std::vector<std::array<std::uint8_t, 3>> glyph_palette() {
    std::vector<std::array<std::uint8_t, 3>> out;
    const std::uint8_t levels[3] = {0, 128, 255};
    for (auto r : levels)
        for (auto g : levels)
            for (auto b : levels) {
                if (r == 255 || g == 255 || b == 255) out.push_back({r, g, b});
            }
    return out;
}

std::vector<std::array<std::uint8_t, 3>> scene_palette() {
    std::vector<std::array<std::uint8_t, 3>> out;
    const std::uint8_t levels[3] = {0, 40, 80};
    for (auto r : levels)
        for (auto g : levels)
            for (auto b : levels) {
                if (r || g || b) out.push_back({r, g, b});
            }
    return out;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::string numbered(const char* prefix, std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
    return buf;
}

std::vector<std::size_t> adjacent_cells(std::size_t cell, std::size_t grid) {
    std::vector<std::size_t> out;
    const std::size_t r = cell / grid, c = cell % grid;
    if (r > 0) out.push_back(cell - grid);
    if (r + 1 < grid) out.push_back(cell + grid);
    if (c > 0) out.push_back(cell - 1);
    if (c + 1 < grid) out.push_back(cell + 1);
    return out;
}

std::size_t sample_weighted(const std::vector<double>& weights, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

}  // namespace

std::array<std::uint8_t, 3> no_place_background() { return {0, 0, 0}; }

SynthWorld make_world(const SynthSpec& spec, std::uint64_t seed) {
    if (spec.num_verbs == 0 || spec.grid == 0 || spec.image_size == 0 || spec.num_nouns == 0) {
        throw ConfigError("synthetic spec values must be positive");
    }
    if (spec.min_roles == 0 || spec.min_roles > spec.max_roles) throw ConfigError("invalid grounded role range");
    if (spec.image_size % spec.grid != 0) throw ConfigError("image size must be a multiple of the grid");
    const std::size_t cell = spec.image_size / spec.grid;
    const std::size_t cells = spec.grid * spec.grid;
    if (spec.min_glyph >= cell) throw ConfigError("glyphs cannot fit: min_glyph must be smaller than a cell");
    if (spec.max_roles > cells) throw ConfigError("glyphs cannot fit: more grounded roles than grid cells");
    if (spec.max_roles > kObjectRoles.size()) throw ConfigError("too many roles per verb for the role vocabulary");
    if (spec.max_roles + 1 > kDefaultMaxRoles) throw ConfigError("roles per verb exceed the lexicon maximum");
    if (spec.nouns_per_role == 0 || spec.nouns_per_role > spec.num_nouns) throw ConfigError("invalid nouns_per_role");
    if (2 * spec.confusable_pairs > spec.num_verbs) throw ConfigError("too many confusable pairs for the verb count");
    const auto palette = glyph_palette();
    const auto scenes = scene_palette();
    if (spec.num_nouns + spec.num_clutter_nouns > palette.size() * 4) throw ConfigError("not enough glyph codes for the noun vocabulary");
    if (spec.num_scene_nouns == 0 || spec.num_scene_nouns > scenes.size()) throw ConfigError("invalid scene noun count");

    Rng rng(seed);
    SynthWorld world;
    world.spec = spec;

    for (const auto& r : kObjectRoles) world.lexicon.add_role(r);
    world.place_role = world.lexicon.add_role(kPlaceRole);

    std::vector<GlyphCode> codes;
    for (const auto& c : palette) {
        for (int t = 0; t < 4; ++t) codes.push_back({c, static_cast<Texture>(t)});
    }
    shuffle(codes, rng);
    std::vector<NounId> object_nouns;
    for (std::size_t i = 0; i < spec.num_nouns; ++i) {
        const NounId n = world.lexicon.add_noun(numbered("obj", i, 2));
        world.glyphs[n] = codes[i];
        object_nouns.push_back(n);
    }
    for (std::size_t i = 0; i < spec.num_clutter_nouns; ++i) {
        const NounId n = world.lexicon.add_noun(numbered("clutter", i, 2));
        world.glyphs[n] = codes[spec.num_nouns + i];
        world.clutter_nouns.push_back(n);
    }
    auto scene_colors = scenes;
    shuffle(scene_colors, rng);
    std::vector<NounId> scene_nouns;
    for (std::size_t i = 0; i < spec.num_scene_nouns; ++i) {
        const NounId n = world.lexicon.add_noun(numbered("scene", i, 2));
        world.backgrounds[n] = scene_colors[i];
        scene_nouns.push_back(n);
    }

    auto random_choices = [&](const std::vector<NounId>& pool, std::vector<NounId>& choices, std::vector<double>& weights) {
        std::vector<NounId> p = pool;
        shuffle(p, rng);
        const std::size_t k = std::min(spec.nouns_per_role, p.size());
        choices.assign(p.begin(), p.begin() + k);
        weights.resize(k);
        double total = 0.0;
        for (auto& w : weights) total += (w = 0.5 + rng.uniform());
        for (auto& w : weights) w /= total;
    };

    std::set<std::vector<std::size_t>> used_layouts;
    auto occupancy = [](const std::vector<std::size_t>& cells_of_roles) {
        std::vector<std::size_t> occ;
        for (auto c : cells_of_roles) {
            if (c != kNoCell) occ.push_back(c);
        }
        std::sort(occ.begin(), occ.end());
        return occ;
    };

    std::vector<std::vector<std::string>> role_lists(spec.num_verbs);
    world.layouts.resize(spec.num_verbs);
    for (VerbId v = 0; v < spec.num_verbs; ++v) {
        const bool second_of_pair = v % 2 == 1 && v / 2 < spec.confusable_pairs;
        auto& layout = world.layouts[v];
        if (second_of_pair) {
            // Same roles and noun statistics as the partner, one role moved to an
            // adjacent free cell.
            const VerbId partner = v - 1;
            role_lists[v] = role_lists[partner];
            layout = world.layouts[partner];
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                std::vector<std::size_t> grounded;
                for (std::size_t s = 0; s < layout.cells.size(); ++s) {
                    if (layout.cells[s] != kNoCell) grounded.push_back(s);
                }
                const std::size_t slot = grounded[rng.below(grounded.size())];
                std::vector<std::size_t> options;
                for (auto c : adjacent_cells(world.layouts[partner].cells[slot], spec.grid)) {
                    if (std::find(layout.cells.begin(), layout.cells.end(), c) == layout.cells.end()) options.push_back(c);
                }
                if (options.empty()) continue;
                auto cells_try = world.layouts[partner].cells;
                cells_try[slot] = options[rng.below(options.size())];
                if (used_layouts.count(occupancy(cells_try))) continue;
                layout.cells = cells_try;
                world.confusions.push_back({v, partner, slot});
                world.confusions.push_back({partner, v, slot});
                placed = true;
            }
            if (!placed) throw ConfigError("cannot build a confusable layout; enlarge the grid");
        } else {
            const std::size_t k = static_cast<std::size_t>(rng.between(static_cast<int>(spec.min_roles),
                                                                        static_cast<int>(spec.max_roles)));
            std::vector<std::string> roles = kObjectRoles;
            shuffle(roles, rng);
            roles.resize(k);
            const bool with_place = rng.uniform() < spec.place_role_prob;
            bool placed = false;
            for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
                std::vector<std::size_t> all(cells);
                std::iota(all.begin(), all.end(), 0);
                shuffle(all, rng);
                std::vector<std::size_t> chosen(all.begin(), all.begin() + k);
                if (used_layouts.count(occupancy(chosen))) continue;
                layout.cells = chosen;
                placed = true;
            }
            if (!placed) throw ConfigError("not enough distinct layouts for the verb count");
            layout.noun_choices.resize(k);
            layout.noun_weights.resize(k);
            for (std::size_t s = 0; s < k; ++s) random_choices(object_nouns, layout.noun_choices[s], layout.noun_weights[s]);
            if (with_place) {
                roles.push_back(kPlaceRole);
                layout.cells.push_back(kNoCell);
                layout.noun_choices.emplace_back();
                layout.noun_weights.emplace_back();
                random_choices(scene_nouns, layout.noun_choices.back(), layout.noun_weights.back());
            }
            role_lists[v] = roles;
        }
        used_layouts.insert(occupancy(layout.cells));
        world.lexicon.add_verb(numbered("verb", v, 2), role_lists[v]);
    }
    return world;
}

namespace {

void draw_glyph(Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, const GlyphCode& code) {
    for (std::size_t dy = 0; dy < h; ++dy) {
        for (std::size_t dx = 0; dx < w; ++dx) {
            bool dim = false;
            switch (code.texture) {
                case Texture::solid: break;
                case Texture::hstripe: dim = dy % 2 == 1; break;
                case Texture::vstripe: dim = dx % 2 == 1; break;
                case Texture::checker: dim = (dx + dy) % 2 == 1; break;
            }
            for (std::size_t c = 0; c < 3; ++c) {
                img.at(y0 + dy, x0 + dx, c) = dim ? static_cast<std::uint8_t>(code.color[c] / 2) : code.color[c];
            }
        }
    }
}

struct Decoy {
    std::size_t x0, y0, w, h;
    NounId noun;
};

// A glyph of random size and position inside `cell`.
Decoy random_glyph(const SynthSpec& spec, std::size_t cell, NounId noun, Rng& rng) {
    const std::size_t size = spec.image_size / spec.grid;
    Decoy d{};
    d.w = static_cast<std::size_t>(rng.between(static_cast<int>(spec.min_glyph), static_cast<int>(size - 1)));
    d.h = static_cast<std::size_t>(rng.between(static_cast<int>(spec.min_glyph), static_cast<int>(size - 1)));
    d.x0 = (cell % spec.grid) * size + static_cast<std::size_t>(rng.between(0, static_cast<int>(size - d.w)));
    d.y0 = (cell / spec.grid) * size + static_cast<std::size_t>(rng.between(0, static_cast<int>(size - d.h)));
    d.noun = noun;
    return d;
}

NounId clutter_noun(const SynthWorld& world, Rng& rng) {
    if (world.clutter_nouns.empty()) throw ConfigError("planted confusions need num_clutter_nouns > 0");
    return world.clutter_nouns[rng.below(world.clutter_nouns.size())];
}

void add_decoys(const SynthWorld& world, VerbId verb, const SynthWorld::Confusion& confusion, Rng& rng,
                std::vector<Decoy>& out) {
    const auto& layout = world.layouts[verb];
    const std::size_t partner_cell = world.layouts[confusion.partner].cells[confusion.slot];
    out.push_back(random_glyph(world.spec, partner_cell, clutter_noun(world, rng), rng));
    std::vector<std::size_t> free;
    for (std::size_t c = 0; c < world.spec.grid * world.spec.grid; ++c) {
        if (c == partner_cell) continue;
        if (std::find(layout.cells.begin(), layout.cells.end(), c) != layout.cells.end()) continue;
        free.push_back(c);
    }
    shuffle(free, rng);
    for (std::size_t k = 0; k < std::min(world.spec.hard_clutter, free.size()); ++k)
        out.push_back(random_glyph(world.spec, free[k], clutter_noun(world, rng), rng));
}

}  // namespace

std::vector<SynthSample> render_samples(const SynthWorld& world, std::size_t count, std::uint64_t seed,
                                        const std::string& id_prefix) {
    const SynthSpec& spec = world.spec;
    const std::size_t cell = world.cell_size();
    const std::size_t size = spec.image_size;
    Rng rng(seed ^ 0x5157554d47454e31ULL);
    std::vector<SynthSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const VerbId verb = i % world.lexicon.num_verbs();
        const VerbLayout& layout = world.layouts[verb];
        const auto& roles = world.lexicon.roles_of(verb);

        SynthSample sample;
        sample.annotation.image_id = id_prefix + numbered("", i, 6);
        sample.annotation.width = size;
        sample.annotation.height = size;
        sample.annotation.frame.verb = verb;
        Image& img = sample.image;
        img.id = sample.annotation.image_id;
        img.height = size;
        img.width = size;
        img.channels = 3;
        img.pixels.assign(size * size * 3, 0);

        const SynthWorld::Confusion* confusion = nullptr;
        for (const auto& c : world.confusions) {
            if (c.verb == verb) confusion = &c;
        }
        const bool hard = confusion != nullptr && rng.uniform() < spec.hard_fraction;
        sample.planted_confusion = hard;
        std::vector<Decoy> decoys;

        std::array<std::uint8_t, 3> background = no_place_background();
        for (std::size_t s = 0; s < roles.size(); ++s) {
            RoleEntry entry;
            entry.role = roles[s];
            const auto& choices = layout.noun_choices[s];
            const NounId noun = choices[sample_weighted(layout.noun_weights[s], rng)];
            entry.gold_nouns.push_back(noun);
            if (choices.size() > 1 && rng.uniform() < spec.synonym_prob) {
                NounId other = noun;
                while (other == noun) other = choices[rng.below(choices.size())];
                entry.gold_nouns.push_back(other);
            }
            if (layout.cells[s] == kNoCell) {
                background = world.backgrounds.at(noun);
            } else {
                const std::size_t w = static_cast<std::size_t>(rng.between(static_cast<int>(spec.min_glyph), static_cast<int>(cell - 1)));
                const std::size_t h = static_cast<std::size_t>(rng.between(static_cast<int>(spec.min_glyph), static_cast<int>(cell - 1)));
                const std::size_t cr = layout.cells[s] / spec.grid, cc = layout.cells[s] % spec.grid;
                std::size_t x0 = cc * cell + static_cast<std::size_t>(rng.between(0, static_cast<int>(cell - w)));
                std::size_t y0 = cr * cell + static_cast<std::size_t>(rng.between(0, static_cast<int>(cell - h)));
                if (spec.absent_prob > 0.0 && rng.uniform() < spec.absent_prob) {
                    sample.annotation.frame.roles.push_back(entry);
                    continue;
                }
                entry.box = BBox::from_corners(static_cast<double>(x0) / size, static_cast<double>(y0) / size,
                                               static_cast<double>(x0 + w) / size, static_cast<double>(y0 + h) / size);
                sample.annotation.frame.roles.push_back(entry);
                // glyph drawn after the background fill below
                continue;
            }
            sample.annotation.frame.roles.push_back(entry);
        }
        for (std::size_t p = 0; p < size * size; ++p) {
            for (std::size_t c = 0; c < 3; ++c) img.pixels[p * 3 + c] = background[c];
        }
        if (hard) add_decoys(world, verb, *confusion, rng, decoys);
        for (const auto& e : sample.annotation.frame.roles) {
            if (!e.box) continue;
            const auto x0 = static_cast<std::size_t>(e.box->x1 * size + 0.5);
            const auto y0 = static_cast<std::size_t>(e.box->y1 * size + 0.5);
            const auto x1 = static_cast<std::size_t>(e.box->x2 * size + 0.5);
            const auto y1 = static_cast<std::size_t>(e.box->y2 * size + 0.5);
            draw_glyph(img, x0, y0, x1 - x0, y1 - y0, world.glyphs.at(e.gold_nouns.front()));
        }
        for (const auto& d : decoys) draw_glyph(img, d.x0, d.y0, d.w, d.h, world.glyphs.at(d.noun));
        out.push_back(std::move(sample));
    }
    return out;
}

SynthDataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    SynthDataset ds{make_world(spec, seed), {}};
    ds.samples = render_samples(ds.world, spec.count, seed);
    return ds;
}

}  // namespace situ::onto
