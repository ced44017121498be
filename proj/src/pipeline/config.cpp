#include "situ/pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "situ/common/error.hpp"
#include "situ/common/hash.hpp"

namespace situ::pipeline {

using nlohmann::ordered_json;

RunConfig default_config() {
    RunConfig c;
    c.train_tnm.steps = 2000;
    c.train_tnm.lr = 3e-3;
    c.train_verb_c.steps = 1000;
    c.train_verb_c.lr = 3e-3;
    c.train_verb_f.steps = 300;
    return c;
}

namespace {

ordered_json stage_json(const StageOptions& s) {
    return {{"steps", s.steps},           {"batch_size", s.batch_size},     {"lr", s.lr},
            {"weight_decay", s.weight_decay}, {"lr_drop_step", s.lr_drop_step}, {"lr_drop_factor", s.lr_drop_factor},
            {"clip_norm", s.clip_norm}};
}

// Reads known keys from a JSON object, rejecting anything it does not know.
class Reader {
public:
    Reader(const ordered_json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, _] : j_.items())
            if (!known_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
    template <class T>
    void get(const char* key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type");
        }
    }
    const ordered_json* child(const char* key) {
        known_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const ordered_json& j_;
    std::string where_;
    std::set<std::string> known_;
};

void read_stage(const ordered_json& j, const std::string& where, StageOptions& s) {
    Reader r(j, where);
    r.get("steps", s.steps);
    r.get("batch_size", s.batch_size);
    r.get("lr", s.lr);
    r.get("weight_decay", s.weight_decay);
    r.get("lr_drop_step", s.lr_drop_step);
    r.get("lr_drop_factor", s.lr_drop_factor);
    r.get("clip_norm", s.clip_norm);
}

ordered_json weights_json(const RunConfig& c) {
    ordered_json j;
    j["seed"] = c.seed;
    const auto& s = c.data.synth;
    j["data"] = {{"num_verbs", s.num_verbs},
                 {"min_roles", s.min_roles},
                 {"max_roles", s.max_roles},
                 {"place_role_prob", s.place_role_prob},
                 {"num_nouns", s.num_nouns},
                 {"num_clutter_nouns", s.num_clutter_nouns},
                 {"num_scene_nouns", s.num_scene_nouns},
                 {"nouns_per_role", s.nouns_per_role},
                 {"image_size", s.image_size},
                 {"grid", s.grid},
                 {"min_glyph", s.min_glyph},
                 {"confusable_pairs", s.confusable_pairs},
                 {"synonym_prob", s.synonym_prob},
                 {"absent_prob", s.absent_prob},
                 {"hard_fraction", s.hard_fraction},
                 {"hard_clutter", s.hard_clutter},
                 {"count", c.data.count},
                 {"splits", c.data.splits},
                 {"eval_hard_fraction", c.data.eval_hard_fraction}};
    const auto& m = c.model;
    j["model"] = {{"patch", m.patch},
                  {"model_dim", m.model_dim},
                  {"num_heads", m.num_heads},
                  {"ff_dim", m.ff_dim},
                  {"tnm_encoder_layers", m.tnm_encoder_layers},
                  {"tnm_decoder_layers", m.tnm_decoder_layers},
                  {"verb_c_encoder_layers", m.verb_c_encoder_layers},
                  {"max_roles", m.max_roles},
                  {"use_verb_query", m.use_verb_query},
                  {"share_role_queries", m.share_role_queries},
                  {"tnm_position", m.tnm_position},
                  {"verb_c_position", m.verb_c_position}};
    j["loss"] = {{"giou", c.loss.giou}, {"l1", c.loss.l1}, {"presence", c.loss.presence}, {"always_present", c.loss.always_present}};
    j["train"] = {{"tnm", stage_json(c.train_tnm)},
                  {"verb_c", stage_json(c.train_verb_c)},
                  {"verb_f", stage_json(c.train_verb_f)}};
    return j;
}

}  // namespace

ordered_json config_to_json(const RunConfig& c) {
    ordered_json j = weights_json(c);
    j["cfvm"] = {{"top_n", c.cfvm.top_n},   {"support_m", c.cfvm.support_m}, {"alpha", c.cfvm.alpha},
                 {"beta", c.cfvm.beta},     {"epsilon", c.cfvm.epsilon},     {"margin", c.cfvm.margin},
                 {"support_mean", c.cfvm.support_mean}};
    j["null_grounding"] = metrics::null_grounding_name(c.null_grounding);
    j["workers"] = c.workers;
    j["out_dir"] = c.out_dir;
    return j;
}

RunConfig config_from_json(const ordered_json& j) {
    RunConfig c = default_config();
    Reader r(j, "config");
    r.get("seed", c.seed);
    if (const auto* d = r.child("data")) {
        Reader rd(*d, "config.data");
        auto& s = c.data.synth;
        rd.get("num_verbs", s.num_verbs);
        rd.get("min_roles", s.min_roles);
        rd.get("max_roles", s.max_roles);
        rd.get("place_role_prob", s.place_role_prob);
        rd.get("num_nouns", s.num_nouns);
        rd.get("num_clutter_nouns", s.num_clutter_nouns);
        rd.get("num_scene_nouns", s.num_scene_nouns);
        rd.get("nouns_per_role", s.nouns_per_role);
        rd.get("image_size", s.image_size);
        rd.get("grid", s.grid);
        rd.get("min_glyph", s.min_glyph);
        rd.get("confusable_pairs", s.confusable_pairs);
        rd.get("synonym_prob", s.synonym_prob);
        rd.get("absent_prob", s.absent_prob);
        rd.get("hard_fraction", s.hard_fraction);
        rd.get("hard_clutter", s.hard_clutter);
        rd.get("count", c.data.count);
        rd.get("splits", c.data.splits);
        rd.get("eval_hard_fraction", c.data.eval_hard_fraction);
    }
    if (const auto* m = r.child("model")) {
        Reader rm(*m, "config.model");
        auto& x = c.model;
        rm.get("patch", x.patch);
        rm.get("model_dim", x.model_dim);
        rm.get("num_heads", x.num_heads);
        rm.get("ff_dim", x.ff_dim);
        rm.get("tnm_encoder_layers", x.tnm_encoder_layers);
        rm.get("tnm_decoder_layers", x.tnm_decoder_layers);
        rm.get("verb_c_encoder_layers", x.verb_c_encoder_layers);
        rm.get("max_roles", x.max_roles);
        rm.get("use_verb_query", x.use_verb_query);
        rm.get("share_role_queries", x.share_role_queries);
        rm.get("tnm_position", x.tnm_position);
        rm.get("verb_c_position", x.verb_c_position);
    }
    if (const auto* l = r.child("loss")) {
        Reader rl(*l, "config.loss");
        rl.get("giou", c.loss.giou);
        rl.get("l1", c.loss.l1);
        rl.get("presence", c.loss.presence);
        rl.get("always_present", c.loss.always_present);
    }
    if (const auto* t = r.child("train")) {
        Reader rt(*t, "config.train");
        if (const auto* s = rt.child("tnm")) read_stage(*s, "config.train.tnm", c.train_tnm);
        if (const auto* s = rt.child("verb_c")) read_stage(*s, "config.train.verb_c", c.train_verb_c);
        if (const auto* s = rt.child("verb_f")) read_stage(*s, "config.train.verb_f", c.train_verb_f);
    }
    if (const auto* f = r.child("cfvm")) {
        Reader rf(*f, "config.cfvm");
        rf.get("top_n", c.cfvm.top_n);
        rf.get("support_m", c.cfvm.support_m);
        rf.get("alpha", c.cfvm.alpha);
        rf.get("beta", c.cfvm.beta);
        rf.get("epsilon", c.cfvm.epsilon);
        rf.get("margin", c.cfvm.margin);
        rf.get("support_mean", c.cfvm.support_mean);
    }
    std::string null_grounding = metrics::null_grounding_name(c.null_grounding);
    r.get("null_grounding", null_grounding);
    c.null_grounding = metrics::parse_null_grounding(null_grounding);
    r.get("workers", c.workers);
    r.get("out_dir", c.out_dir);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig c = config_from_json(j);
    validate(c);
    return c;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << config_to_json(config).dump(2) << '\n';
}

void validate(const RunConfig& c) {
    const auto& sp = c.data.splits;
    if (sp[0] <= 0.0 || sp[1] < 0.0 || sp[2] < 0.0 || std::abs(sp[0] + sp[1] + sp[2] - 1.0) > 1e-9)
        throw ConfigError("data.splits must be non-negative, with a positive train share, and sum to 1");
    for (double s : sp) {
        const double n = s * static_cast<double>(c.data.count);
        if (std::abs(n - std::round(n)) > 1e-6)
            throw ConfigError("data.splits do not divide data.count into whole images");
    }
    if (c.data.eval_hard_fraction < 0.0 || c.data.eval_hard_fraction > 1.0)
        throw ConfigError("data.eval_hard_fraction must lie in [0, 1]");
    const auto& m = c.model;
    if (m.model_dim == 0 || m.model_dim % 4 != 0) throw ConfigError("model.model_dim must be a positive multiple of 4");
    if (m.num_heads == 0 || m.model_dim % m.num_heads != 0) throw ConfigError("model.num_heads must divide model_dim");
    if (m.patch == 0 || c.data.synth.image_size % m.patch != 0) throw ConfigError("model.patch must divide image_size");
    for (const auto* s : {&c.train_tnm, &c.train_verb_c, &c.train_verb_f}) {
        if (s->batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(s->lr > 0.0)) throw ConfigError("lr must be positive");
    }
    if (c.cfvm.top_n > c.data.synth.num_verbs) throw ConfigError("cfvm.top_n exceeds the number of verbs");
    cfvm::validate(c.cfvm);
    if (c.workers == 0) throw ConfigError("workers must be at least 1");
}

std::string config_hash(const RunConfig& config) { return hex_digest(fnv1a(weights_json(config).dump())); }

num::TrainOptions train_options(const StageOptions& s, std::uint64_t seed) {
    num::TrainOptions o;
    o.steps = s.steps;
    o.batch_size = s.batch_size;
    o.lr = s.lr;
    o.weight_decay = s.weight_decay;
    o.lr_drop_step = s.lr_drop_step;
    o.lr_drop_factor = s.lr_drop_factor;
    o.clip_norm = s.clip_norm;
    o.seed = seed;
    return o;
}

}  // namespace situ::pipeline
