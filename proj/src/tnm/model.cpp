#include "situ/tnm/model.hpp"

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"
#include "situ/transformer/position.hpp"

namespace situ::tnm {

Tensor extract_patches(const onto::Image& image, std::size_t patch) {
    if (patch == 0 || image.height % patch != 0 || image.width % patch != 0)
        throw ConfigError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                          " is not divisible into " + std::to_string(patch) + "-pixel patches");
    const std::size_t gh = image.height / patch, gw = image.width / patch;
    const std::size_t feat = patch * patch * image.channels;
    std::vector<double> values(gh * gw * feat);
    std::size_t k = 0;
    for (std::size_t gy = 0; gy < gh; ++gy)
        for (std::size_t gx = 0; gx < gw; ++gx)
            for (std::size_t y = 0; y < patch; ++y)
                for (std::size_t x = 0; x < patch; ++x)
                    for (std::size_t c = 0; c < image.channels; ++c)
                        values[k++] = image.value(gy * patch + y, gx * patch + x, c);
    return Tensor::from({gh * gw, feat}, std::move(values));
}

PatchEmbed PatchEmbed::make(std::size_t patch, std::size_t channels, std::size_t dim, Rng& rng) {
    return {patch, channels, tf::Linear::xavier(patch * patch * channels, dim, rng)};
}

Tensor PatchEmbed::tokens(const onto::Image& image) const {
    if (image.channels != channels)
        throw ShapeError("backbone expects " + std::to_string(channels) + " channels, image has " +
                         std::to_string(image.channels));
    return proj.forward(extract_patches(image, patch));
}

Tensor PatchEmbed::feature_map(const onto::Image& image) const {
    const Tensor t = tokens(image);
    return num::reshape(num::transpose(t), {t.cols(), image.height / patch, image.width / patch});
}

void PatchEmbed::collect(num::ParamList& out, const std::string& prefix) const { proj.collect(out, prefix + ".proj"); }

AssembledQueries assemble_queries(onto::VerbId verb, const onto::Lexicon& lexicon, const QuerySet& qs,
                                  std::size_t max_roles) {
    const auto& roles = lexicon.roles_of(verb);
    if (roles.size() > max_roles) throw SchemaError("verb has more roles than the query budget");
    const std::size_t d = qs.verb_table.cols();
    std::vector<Tensor> parts;
    AssembledQueries out;
    out.mask.assign(1 + max_roles, false);
    if (qs.use_verb_query) {
        parts.push_back(num::gather_rows(qs.verb_table, {verb}));
        out.mask[0] = true;
    } else {
        parts.push_back(Tensor::zeros({1, d}));
    }
    std::vector<std::size_t> rows(roles.size());
    for (std::size_t s = 0; s < roles.size(); ++s) {
        rows[s] = qs.role_row(verb, s);
        out.mask[1 + s] = true;
    }
    parts.push_back(num::gather_rows(qs.role_table, rows));
    if (roles.size() < max_roles) parts.push_back(Tensor::zeros({max_roles - roles.size(), d}));
    out.queries = num::concat_rows(parts);
    return out;
}

onto::NounId argmax_lowest(std::span<const double> logits) {
    onto::NounId best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return best;
}

std::vector<RoleDetection> TnmOutput::detections() const {
    std::vector<RoleDetection> out(roles.size());
    const std::size_t n = noun_logits.cols(), d = role_features.cols();
    const auto logits = noun_logits.values();
    const auto b = boxes.values();
    const auto feats = role_features.values();
    for (std::size_t i = 0; i < roles.size(); ++i) {
        auto& det = out[i];
        det.role = roles[i];
        det.noun_logits.assign(logits.begin() + i * n, logits.begin() + (i + 1) * n);
        det.noun = argmax_lowest(det.noun_logits);
        det.box = onto::BBox::from_center(b[4 * i], b[4 * i + 1], b[4 * i + 2], b[4 * i + 3]);
        det.presence_logit = presence_logits.values()[i];
        det.feature.assign(feats.begin() + i * d, feats.begin() + (i + 1) * d);
    }
    return out;
}

namespace {

QuerySet make_queries(const TnmConfig& c, const onto::Lexicon& lex, Rng& rng) {
    QuerySet qs;
    qs.use_verb_query = c.use_verb_query;
    qs.share_role_queries = c.share_role_queries;
    qs.verb_table = tf::normal_parameter(lex.num_verbs(), c.model_dim, 1.0, rng);
    qs.role_rows.resize(lex.num_verbs());
    std::size_t pairs = 0;
    for (onto::VerbId v = 0; v < lex.num_verbs(); ++v) {
        for (std::size_t s = 0; s < lex.roles_of(v).size(); ++s)
            qs.role_rows[v].push_back(c.share_role_queries ? lex.roles_of(v)[s] : pairs++);
    }
    const std::size_t table_rows = c.share_role_queries ? lex.num_roles() : pairs;
    qs.role_table = tf::normal_parameter(std::max<std::size_t>(1, table_rows), c.model_dim, 1.0, rng);
    return qs;
}

}  // namespace

TnmModel::TnmModel(const TnmConfig& config, const onto::Lexicon& lexicon, std::uint64_t seed)
    : config_(config), lexicon_(lexicon) {
    if (config.model_dim % 4 != 0) throw ConfigError("model_dim must be a multiple of 4");
    if (config.image_size % config.patch != 0) throw ConfigError("image_size must be a multiple of patch");
    if (lexicon.num_verbs() == 0) throw ConfigError("lexicon has no verbs");
    for (onto::VerbId v = 0; v < lexicon.num_verbs(); ++v)
        if (lexicon.roles_of(v).size() > config.max_roles)
            throw ConfigError("verb " + lexicon.verb_name(v) + " exceeds max_roles");
    Rng rng(seed);
    const std::size_t d = config.model_dim;
    backbone_ = PatchEmbed::make(config.patch, config.channels, d, rng);
    encoder_ = tf::EncoderStack::make({config.encoder_layers, d, config.num_heads, config.ff_dim}, rng);
    decoder_ = tf::DecoderStack::make({config.decoder_layers, d, config.num_heads, config.ff_dim}, rng);
    queries_ = make_queries(config, lexicon, rng);
    noun_hidden_ = tf::Linear::xavier(d, d, rng);
    noun_out_ = tf::Linear::xavier(d, lexicon.num_nouns(), rng);
    box_hidden_ = tf::Linear::xavier(d, d, rng);
    box_out_ = tf::Linear::xavier(d, 4, rng);
    presence_ = tf::Linear::xavier(d, 1, rng);
    const std::size_t g = config.image_size / config.patch;
    if (config.use_position) pos_ = tf::sinusoidal_pe(g, g, d);
}

Tensor TnmModel::encode_image(const onto::Image& image) const {
    if (image.height != config_.image_size || image.width != config_.image_size)
        throw ShapeError("image " + image.id + " is not " + std::to_string(config_.image_size) + " pixels square");
    const Tensor tokens = backbone_.tokens(image);
    return tf::encode(tokens, encoder_, tf::all_valid(tokens.rows()), pos_);
}

TnmOutput TnmModel::decode_verb(const Tensor& memory, onto::VerbId verb) const {
    const auto q = assemble_queries(verb, lexicon_, queries_, config_.max_roles);
    const Tensor out = tf::decode(q.queries, memory, decoder_, q.mask, tf::all_valid(memory.rows()), pos_);
    TnmOutput r;
    r.verb = verb;
    r.roles = lexicon_.roles_of(verb);
    const std::size_t m = r.roles.size();
    if (queries_.use_verb_query) r.verb_feature = num::slice_rows(out, 0, 1);
    r.role_features = num::slice_rows(out, 1, 1 + m);
    r.noun_logits = noun_out_.forward(num::relu(noun_hidden_.forward(r.role_features)));
    r.boxes = num::sigmoid(box_out_.forward(num::relu(box_hidden_.forward(r.role_features))));
    r.presence_logits = presence_.forward(r.role_features);
    return r;
}

TnmOutput TnmModel::forward(const onto::Image& image, onto::VerbId verb) const {
    return decode_verb(encode_image(image), verb);
}

num::ParamList TnmModel::parameters() const {
    num::ParamList out;
    backbone_.collect(out, "tnm.backbone");
    encoder_.collect(out, "tnm.encoder");
    decoder_.collect(out, "tnm.decoder");
    out.push_back({"tnm.query.verb", queries_.verb_table, lexicon_.verb_names()});
    std::vector<std::string> keys;
    if (queries_.share_role_queries) {
        keys = lexicon_.role_names();
        if (keys.empty()) keys.push_back("");
    } else {
        for (onto::VerbId v = 0; v < lexicon_.num_verbs(); ++v)
            for (auto r : lexicon_.roles_of(v)) keys.push_back(lexicon_.verb_name(v) + "/" + lexicon_.role_name(r));
    }
    out.push_back({"tnm.query.role", queries_.role_table, keys});
    noun_hidden_.collect(out, "tnm.head.noun_hidden");
    noun_out_.collect(out, "tnm.head.noun_out");
    box_hidden_.collect(out, "tnm.head.box_hidden");
    box_out_.collect(out, "tnm.head.box_out");
    presence_.collect(out, "tnm.head.presence");
    return out;
}

}  // namespace situ::tnm
