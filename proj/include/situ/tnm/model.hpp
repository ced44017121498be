#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "situ/numerics/checkpoint.hpp"
#include "situ/ontology/frame.hpp"
#include "situ/ontology/images.hpp"
#include "situ/ontology/lexicon.hpp"
#include "situ/transformer/stack.hpp"

namespace situ::tnm {

using num::Tensor;

// Backbone stand-in: non-overlapping patches flattened in (row, col, channel)
// order and linearly projected to model_dim.
struct PatchEmbed {
    std::size_t patch = 4;
    std::size_t channels = 3;
    tf::Linear proj;

    static PatchEmbed make(std::size_t patch, std::size_t channels, std::size_t dim, Rng& rng);

    // [grid_h * grid_w x dim], row index gy * grid_w + gx.
    Tensor tokens(const onto::Image& image) const;
    // The same features as a [dim x grid_h x grid_w] feature map.
    Tensor feature_map(const onto::Image& image) const;
    void collect(num::ParamList& out, const std::string& prefix) const;
};

// Raw patch matrix [grid_h * grid_w x patch * patch * channels], pixel / 255.
Tensor extract_patches(const onto::Image& image, std::size_t patch);

struct TnmConfig {
    std::size_t image_size = 24;
    std::size_t channels = 3;
    std::size_t patch = 4;
    std::size_t model_dim = 64;
    std::size_t num_heads = 4;
    std::size_t ff_dim = 128;
    std::size_t encoder_layers = 6;
    std::size_t decoder_layers = 6;
    std::size_t max_roles = onto::kDefaultMaxRoles;
    bool use_verb_query = true;
    bool share_role_queries = true;
    bool use_position = true;
};

// Decoder query tables. With shared role queries there is one row per role id
// (used by every verb that has the role); otherwise one row per (verb, role).
struct QuerySet {
    Tensor verb_table;  // [num_verbs x d]
    Tensor role_table;  // [num_roles x d] or [num (verb, role) pairs x d]
    bool use_verb_query = true;
    bool share_role_queries = true;
    std::vector<std::vector<std::size_t>> role_rows;  // per verb, per slot -> row of role_table

    std::size_t role_row(onto::VerbId verb, std::size_t slot) const { return role_rows.at(verb).at(slot); }
};

struct AssembledQueries {
    Tensor queries;   // [(1 + max_roles) x d]
    tf::PadMask mask;  // slot 0 verb, 1..m roles, the rest padding
};

AssembledQueries assemble_queries(onto::VerbId verb, const onto::Lexicon& lexicon, const QuerySet& qs,
                                  std::size_t max_roles);

struct RoleDetection {
    onto::RoleId role = 0;
    std::vector<double> noun_logits;
    onto::NounId noun = 0;  // argmax, lowest id on ties
    onto::BBox box;
    double presence_logit = 0.0;
    std::vector<double> feature;
};

struct TnmOutput {
    onto::VerbId verb = 0;
    std::vector<onto::RoleId> roles;
    Tensor verb_feature;     // [1 x d]; undefined without a verb query
    Tensor role_features;    // [m x d]
    Tensor noun_logits;      // [m x num_nouns]
    Tensor boxes;            // [m x 4] sigmoid (cx, cy, w, h)
    Tensor presence_logits;  // [m x 1]

    std::vector<RoleDetection> detections() const;
};

onto::NounId argmax_lowest(std::span<const double> logits);

class TnmModel {
public:
    TnmModel(const TnmConfig& config, const onto::Lexicon& lexicon, std::uint64_t seed);

    const TnmConfig& config() const { return config_; }
    const onto::Lexicon& lexicon() const { return lexicon_; }
    const QuerySet& queries() const { return queries_; }
    const PatchEmbed& backbone() const { return backbone_; }

    // Encoded visual memory for an image (independent of the verb).
    Tensor encode_image(const onto::Image& image) const;
    TnmOutput decode_verb(const Tensor& memory, onto::VerbId verb) const;
    TnmOutput forward(const onto::Image& image, onto::VerbId verb) const;

    num::ParamList parameters() const;

private:
    TnmConfig config_;
    onto::Lexicon lexicon_;
    PatchEmbed backbone_;
    tf::EncoderStack encoder_;
    tf::DecoderStack decoder_;
    QuerySet queries_;
    tf::Linear noun_hidden_, noun_out_;
    tf::Linear box_hidden_, box_out_;
    tf::Linear presence_;
    Tensor pos_;
};

}  // namespace situ::tnm
