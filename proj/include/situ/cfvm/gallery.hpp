#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "situ/cfvm/verb_c.hpp"
#include "situ/tnm/model.hpp"

namespace situ::cfvm {

inline constexpr const char* kGalleryFormat = "situ-gallery-v1";

struct GalleryEntry {
    std::string image_id;
    onto::VerbId verb = 0;
    std::vector<double> cls_feature;
    std::vector<std::vector<double>> role_features;  // TNM features under the gold verb
    bool operator==(const GalleryEntry&) const = default;
};

class Gallery {
public:
    std::string checkpoint_hash;
    std::string config_hash;
    std::vector<GalleryEntry> entries;

    void add(GalleryEntry entry);
    // Entry indices with gold verb v (D_v), in insertion order.
    const std::vector<std::size_t>& of_verb(onto::VerbId v) const;
    std::size_t size() const { return entries.size(); }

private:
    std::map<onto::VerbId, std::vector<std::size_t>> by_verb_;
};

// Digest identifying the model weights a gallery was computed from.
std::string models_hash(const VerbCModel& verb_c, const tnm::TnmModel& tnm);

Gallery build_gallery(std::span<const onto::Image> images, std::span<const onto::AnnotatedImage> annotations,
                      const VerbCModel& verb_c, const tnm::TnmModel& tnm, std::size_t workers = 1);

void save_gallery(const std::filesystem::path& path, const Gallery& gallery, const onto::Lexicon& lexicon);
Gallery load_gallery(const std::filesystem::path& path, const onto::Lexicon& lexicon);

// SchemaError unless the gallery was built from exactly these weights.
void require_fresh(const Gallery& gallery, const VerbCModel& verb_c, const tnm::TnmModel& tnm);

}  // namespace situ::cfvm
