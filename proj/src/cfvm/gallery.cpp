#include "situ/cfvm/gallery.hpp"

#include <fstream>

#include "situ/cfvm/retrieval.hpp"
#include "situ/common/error.hpp"
#include "situ/common/hash.hpp"
#include "situ/common/parallel.hpp"
#include "situ/numerics/tensor.hpp"

namespace situ::cfvm {

void Gallery::add(GalleryEntry entry) {
    by_verb_[entry.verb].push_back(entries.size());
    entries.push_back(std::move(entry));
}

const std::vector<std::size_t>& Gallery::of_verb(onto::VerbId v) const {
    static const std::vector<std::size_t> empty;
    auto it = by_verb_.find(v);
    return it == by_verb_.end() ? empty : it->second;
}

std::string models_hash(const VerbCModel& verb_c, const tnm::TnmModel& tnm) {
    const std::string joined = num::params_digest(verb_c.parameters()) + ":" + num::params_digest(tnm.parameters());
    return hex_digest(fnv1a(joined));
}

Gallery build_gallery(std::span<const onto::Image> images, std::span<const onto::AnnotatedImage> annotations,
                      const VerbCModel& verb_c, const tnm::TnmModel& tnm, std::size_t workers) {
    if (images.size() != annotations.size()) throw PreconditionError("build_gallery: images and annotations differ in length");
    std::vector<GalleryEntry> slots(images.size());
    parallel_for(images.size(), workers, [&](std::size_t i) {
        const auto& ann = annotations[i];
        try {
            if (images[i].id != ann.image_id) throw PreconditionError("image paired with annotation " + ann.image_id);
            GalleryEntry e;
            e.image_id = ann.image_id;
            e.verb = ann.frame.verb;
            e.cls_feature = verb_c.forward(images[i]).cls_feature.to_vector();
            e.role_features = role_feature_rows(tnm.forward(images[i], ann.frame.verb));
            slots[i] = std::move(e);
        } catch (const Error& err) {
            throw PreconditionError("build_gallery: image " + ann.image_id + ": " + err.what());
        }
    });
    Gallery g;
    g.checkpoint_hash = models_hash(verb_c, tnm);
    for (auto& e : slots) g.add(std::move(e));
    return g;
}

void save_gallery(const std::filesystem::path& path, const Gallery& gallery, const onto::Lexicon& lexicon) {
    nlohmann::ordered_json j;
    j["format"] = kGalleryFormat;
    j["checkpoint_hash"] = gallery.checkpoint_hash;
    j["config_hash"] = gallery.config_hash;
    auto& entries = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : gallery.entries) {
        entries.push_back({{"image_id", e.image_id},
                           {"verb", lexicon.verb_name(e.verb)},
                           {"cls", e.cls_feature},
                           {"roles", e.role_features}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

Gallery load_gallery(const std::filesystem::path& path, const onto::Lexicon& lexicon) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    try {
        if (j.at("format") != kGalleryFormat) throw SchemaError(path.string() + ": not a gallery file");
        Gallery g;
        g.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
        g.config_hash = j.value("config_hash", "");
        std::size_t dim = 0;
        for (const auto& je : j.at("entries")) {
            GalleryEntry e;
            e.image_id = je.at("image_id").get<std::string>();
            e.verb = lexicon.verb_id(je.at("verb").get<std::string>());
            e.cls_feature = je.at("cls").get<std::vector<double>>();
            e.role_features = je.at("roles").get<std::vector<std::vector<double>>>();
            if (dim == 0) dim = e.cls_feature.size();
            if (e.role_features.size() != lexicon.roles_of(e.verb).size())
                throw SchemaError("gallery entry " + e.image_id + ": role count does not match its verb");
            if (e.cls_feature.size() != dim) throw SchemaError("gallery entry " + e.image_id + ": feature size mismatch");
            for (const auto& r : e.role_features) {
                if (r.size() != dim) throw SchemaError("gallery entry " + e.image_id + ": feature size mismatch");
                num::require_finite(r, "gallery");
            }
            num::require_finite(e.cls_feature, "gallery");
            g.add(std::move(e));
        }
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void require_fresh(const Gallery& gallery, const VerbCModel& verb_c, const tnm::TnmModel& tnm) {
    if (gallery.checkpoint_hash != models_hash(verb_c, tnm))
        throw SchemaError("gallery is stale: it was built from different model weights; rerun build-gallery");
}

}  // namespace situ::cfvm
