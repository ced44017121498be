#include "situ/pipeline/stages.hpp"

#include <cmath>
#include <fstream>

#include "situ/cfvm/rerank.hpp"
#include "situ/common/error.hpp"
#include "situ/common/parallel.hpp"
#include "situ/ontology/synth.hpp"
#include "situ/tnm/train.hpp"

namespace situ::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Distinct, fixed streams derived from the run seed.
std::uint64_t sub_seed(const RunConfig& c, std::uint64_t stream) { return c.seed * 0x9e3779b97f4a7c15ULL + stream; }

enum Stream : std::uint64_t {
    kWorld = 1,
    kTrainImages,
    kDevImages,
    kTestImages,
    kTnmInit,
    kTnmBatches,
    kVerbCInit,
    kVerbCBatches,
    kVerbFInit,
    kVerbFBatches,
};

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const ordered_json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void require_hash(const std::string& found, const RunConfig& c, const fs::path& artifact) {
    const std::string expected = config_hash(c);
    if (found != expected)
        throw SchemaError(artifact.string() + " was produced by config " + found + ", current config is " + expected);
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw PreconditionError(what + " not found at " + path.string());
}

void write_loss_log(const fs::path& path, const std::vector<double>& losses) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, losses[i]);
        out << buf;
    }
}

ordered_json checkpoint_meta(const RunConfig& c, const std::string& stage, const std::vector<double>& losses) {
    return {{"stage", stage},
            {"config_hash", config_hash(c)},
            {"steps", losses.size()},
            {"final_loss", losses.empty() ? 0.0 : losses.back()}};
}

void load_checked(const RunConfig& c, const fs::path& path, num::ParamList params, const std::string& what) {
    require_file(path, what + " checkpoint");
    const auto meta = num::load_checkpoint(path, params);
    require_hash(meta.value("config_hash", ""), c, path);
}

}  // namespace

SplitSizes split_sizes(const DataConfig& d) {
    SplitSizes s;
    s.train = static_cast<std::size_t>(std::llround(d.splits[0] * static_cast<double>(d.count)));
    s.dev = static_cast<std::size_t>(std::llround(d.splits[1] * static_cast<double>(d.count)));
    s.test = d.count - s.train - s.dev;
    return s;
}

void gen_data(const RunConfig& c) {
    validate(c);
    const Paths paths(c.out_dir);
    fs::create_directories(paths.root / "data");
    const onto::SynthWorld world = onto::make_world(c.data.synth, sub_seed(c, kWorld));
    onto::SynthWorld eval_world = world;
    eval_world.spec.hard_fraction = c.data.eval_hard_fraction;
    const auto sizes = split_sizes(c.data);

    onto::save_lexicon(paths.lexicon(), world.lexicon);
    ordered_json manifest{{"format", "situ-dataset-v1"}, {"config_hash", config_hash(c)}, {"splits", ordered_json::object()}};
    const std::tuple<const char*, std::size_t, Stream, const onto::SynthWorld*> splits[] = {
        {"train", sizes.train, kTrainImages, &world},
        {"dev", sizes.dev, kDevImages, &eval_world},
        {"test", sizes.test, kTestImages, &eval_world},
    };
    for (const auto& [name, count, stream, w] : splits) {
        const auto samples = onto::render_samples(*w, count, sub_seed(c, stream), name);
        std::vector<onto::Image> images;
        onto::AnnotationSet annotations;
        ordered_json planted = ordered_json::array();
        for (const auto& s : samples) {
            images.push_back(s.image);
            annotations.push_back(s.annotation);
            if (s.planted_confusion) planted.push_back(s.annotation.image_id);
        }
        onto::write_annotations(paths.annotations(name), annotations, world.lexicon);
        onto::write_images(paths.images(name), images);
        manifest["splits"][name] = {{"count", count}, {"planted_confusion", planted}};
    }
    write_json(paths.manifest(), manifest);
}

onto::Lexicon load_lexicon_checked(const RunConfig& c) {
    const Paths paths(c.out_dir);
    require_file(paths.manifest(), "dataset (run gen-data first)");
    require_hash(read_json(paths.manifest()).value("config_hash", ""), c, paths.manifest());
    return onto::load_lexicon(paths.lexicon());
}

Split load_split(const RunConfig& c, const onto::Lexicon& lexicon, const std::string& split) {
    const Paths paths(c.out_dir);
    Split s;
    s.annotations = onto::load_annotations(paths.annotations(split), lexicon);
    s.images = onto::read_images(paths.images(split));
    if (s.images.size() != s.annotations.size())
        throw SchemaError("split " + split + ": image and annotation counts differ");
    for (std::size_t i = 0; i < s.images.size(); ++i)
        if (s.images[i].id != s.annotations[i].image_id)
            throw SchemaError("split " + split + ": image " + s.images[i].id + " does not match annotation " +
                              s.annotations[i].image_id);
    return s;
}

tnm::TnmConfig tnm_config(const RunConfig& c) {
    tnm::TnmConfig t;
    t.image_size = c.data.synth.image_size;
    t.patch = c.model.patch;
    t.model_dim = c.model.model_dim;
    t.num_heads = c.model.num_heads;
    t.ff_dim = c.model.ff_dim;
    t.encoder_layers = c.model.tnm_encoder_layers;
    t.decoder_layers = c.model.tnm_decoder_layers;
    t.max_roles = c.model.max_roles;
    t.use_verb_query = c.model.use_verb_query;
    t.share_role_queries = c.model.share_role_queries;
    t.use_position = c.model.tnm_position;
    return t;
}

cfvm::VerbCConfig verb_c_config(const RunConfig& c) {
    cfvm::VerbCConfig v;
    v.image_size = c.data.synth.image_size;
    v.patch = c.model.patch;
    v.model_dim = c.model.model_dim;
    v.num_heads = c.model.num_heads;
    v.ff_dim = c.model.ff_dim;
    v.encoder_layers = c.model.verb_c_encoder_layers;
    v.use_position = c.model.verb_c_position;
    return v;
}

num::TrainLog train_tnm_stage(const RunConfig& c) {
    const auto lexicon = load_lexicon_checked(c);
    const auto train = load_split(c, lexicon, "train");
    tnm::TnmModel model(tnm_config(c), lexicon, sub_seed(c, kTnmInit));
    const auto log = tnm::train_tnm(model, train.images, train.annotations, c.loss,
                                    train_options(c.train_tnm, sub_seed(c, kTnmBatches)));
    const Paths paths(c.out_dir);
    fs::create_directories(paths.tnm_checkpoint().parent_path());
    num::save_checkpoint(paths.tnm_checkpoint(), model.parameters(), checkpoint_meta(c, "tnm", log.losses));
    write_loss_log(paths.loss_log("tnm"), log.losses);
    return log;
}

num::TrainLog train_verb_c_stage(const RunConfig& c) {
    const auto lexicon = load_lexicon_checked(c);
    const auto train = load_split(c, lexicon, "train");
    cfvm::VerbCModel model(verb_c_config(c), lexicon, sub_seed(c, kVerbCInit));
    const auto log =
        cfvm::train_verb_c(model, train.images, train.annotations, train_options(c.train_verb_c, sub_seed(c, kVerbCBatches)));
    const Paths paths(c.out_dir);
    fs::create_directories(paths.verb_c_checkpoint().parent_path());
    num::save_checkpoint(paths.verb_c_checkpoint(), model.parameters(), checkpoint_meta(c, "verb_c", log.losses));
    write_loss_log(paths.loss_log("verb_c"), log.losses);
    return log;
}

tnm::TnmModel load_tnm(const RunConfig& c, const onto::Lexicon& lexicon) {
    tnm::TnmModel model(tnm_config(c), lexicon, sub_seed(c, kTnmInit));
    load_checked(c, Paths(c.out_dir).tnm_checkpoint(), model.parameters(), "TNM");
    return model;
}

cfvm::VerbCModel load_verb_c(const RunConfig& c, const onto::Lexicon& lexicon) {
    cfvm::VerbCModel model(verb_c_config(c), lexicon, sub_seed(c, kVerbCInit));
    load_checked(c, Paths(c.out_dir).verb_c_checkpoint(), model.parameters(), "Verb-c");
    return model;
}

cfvm::FineHead load_verb_f(const RunConfig& c) {
    cfvm::FineHead head(c.model.model_dim, sub_seed(c, kVerbFInit));
    load_checked(c, Paths(c.out_dir).verb_f_checkpoint(), head.parameters(), "Verb-f");
    return head;
}

void build_gallery_stage(const RunConfig& c) {
    const auto lexicon = load_lexicon_checked(c);
    const auto tnm = load_tnm(c, lexicon);
    const auto verb_c = load_verb_c(c, lexicon);
    const auto train = load_split(c, lexicon, "train");
    auto gallery = cfvm::build_gallery(train.images, train.annotations, verb_c, tnm, c.workers);
    gallery.config_hash = config_hash(c);
    cfvm::save_gallery(Paths(c.out_dir).gallery(), gallery, lexicon);
}

namespace {

cfvm::Gallery load_gallery_checked(const RunConfig& c, const onto::Lexicon& lexicon, const cfvm::VerbCModel& verb_c,
                                   const tnm::TnmModel& tnm) {
    const Paths paths(c.out_dir);
    require_file(paths.gallery(), "gallery (run build-gallery first)");
    auto gallery = cfvm::load_gallery(paths.gallery(), lexicon);
    require_hash(gallery.config_hash, c, paths.gallery());
    cfvm::require_fresh(gallery, verb_c, tnm);
    return gallery;
}

}  // namespace

cfvm::VerbFLog train_verb_f_stage(const RunConfig& c) {
    const auto lexicon = load_lexicon_checked(c);
    const auto tnm = load_tnm(c, lexicon);
    const auto verb_c = load_verb_c(c, lexicon);
    const auto gallery = load_gallery_checked(c, lexicon, verb_c, tnm);
    const auto train = load_split(c, lexicon, "train");
    if (train.images.size() != gallery.size()) throw SchemaError("gallery does not cover the training split");
    const auto pools = cfvm::mine_all_triplets(train.images, gallery, verb_c, tnm, c.cfvm, c.workers);
    cfvm::FineHead head(c.model.model_dim, sub_seed(c, kVerbFInit));
    const auto log = cfvm::train_verb_f(head, gallery, pools, c.cfvm, train_options(c.train_verb_f, sub_seed(c, kVerbFBatches)));
    const Paths paths(c.out_dir);
    auto meta = checkpoint_meta(c, "verb_f", log.train.losses);
    meta["usable_anchors"] = log.usable_anchors;
    meta["gallery_hash"] = gallery.checkpoint_hash;
    num::save_checkpoint(paths.verb_f_checkpoint(), head.parameters(), meta);
    write_loss_log(paths.loss_log("verb_f"), log.train.losses);
    return log;
}

metrics::PredictionDump predict_stage(const RunConfig& c, const std::string& split) {
    validate(c);
    const auto lexicon = load_lexicon_checked(c);
    const auto tnm = load_tnm(c, lexicon);
    const auto verb_c = load_verb_c(c, lexicon);
    const auto head = load_verb_f(c);
    const auto gallery = load_gallery_checked(c, lexicon, verb_c, tnm);
    const auto data = load_split(c, lexicon, split);
    const auto embeddings = cfvm::embed_gallery(gallery, head);

    std::vector<metrics::Prediction> preds(data.images.size());
    parallel_for(data.images.size(), c.workers, [&](std::size_t i) {
        const auto& image = data.images[i];
        const auto coarse = verb_c.forward(image);
        const auto candidates = cfvm::top_n(coarse.probs.values(), c.cfvm.top_n);
        const num::Tensor memory = tnm.encode_image(image);
        metrics::Prediction p;
        p.image_id = image.id;
        auto decode = [&](onto::VerbId v) {
            const auto out = tnm.decode_verb(memory, v);
            std::vector<metrics::RolePrediction> roles;
            for (const auto& det : out.detections())
                roles.push_back({det.noun, det.box, tnm::predicted_presence(det, c.loss)});
            p.frames[v] = std::move(roles);
            return out;
        };
        std::vector<cfvm::SupportSet> supports;
        for (const auto& cand : candidates)
            supports.push_back(cfvm::retrieve_support(cfvm::role_feature_rows(decode(cand.verb)), cand.verb, gallery,
                                                      c.cfvm.support_m));
        // The gold-verb frame is always dumped so the gt_verb setting can be scored.
        const onto::VerbId gold = data.annotations[i].frame.verb;
        if (!p.frames.count(gold)) decode(gold);
        const auto result = cfvm::rerank(candidates, supports, embeddings, head, coarse.cls_feature, c.cfvm);
        for (std::size_t k = 0; k < result.order.size(); ++k) p.ranked.push_back({result.order[k], result.scores[k]});
        preds[i] = std::move(p);
    });
    metrics::PredictionDump dump{config_hash(c), std::move(preds)};
    const Paths paths(c.out_dir);
    fs::create_directories(paths.predictions(split).parent_path());
    metrics::write_predictions(paths.predictions(split), dump, lexicon);
    return dump;
}

std::vector<metrics::MetricReport> eval_stage(const RunConfig& c, const std::string& split,
                                              const std::vector<metrics::Setting>& settings) {
    const auto lexicon = load_lexicon_checked(c);
    const Paths paths(c.out_dir);
    require_file(paths.predictions(split), "prediction dump (run predict first)");
    const auto dump = metrics::read_predictions(paths.predictions(split), lexicon);
    require_hash(dump.config_hash, c, paths.predictions(split));
    const auto gold = onto::load_annotations(paths.annotations(split), lexicon);
    metrics::require_same_images(dump.predictions, gold);
    std::vector<metrics::MetricReport> reports;
    for (auto s : settings) {
        reports.push_back(metrics::evaluate(dump.predictions, gold, lexicon, s, c.null_grounding));
        write_json(paths.report(split, s), metrics::report_to_json(reports.back()));
    }
    return reports;
}

}  // namespace situ::pipeline
