#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "situ/cfvm/gallery.hpp"
#include "situ/cfvm/train.hpp"
#include "situ/metrics/prediction_io.hpp"
#include "situ/pipeline/config.hpp"

namespace situ::pipeline {

// File layout under RunConfig::out_dir.
struct Paths {
    std::filesystem::path root;

    explicit Paths(std::filesystem::path r) : root(std::move(r)) {}
    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path lexicon() const { return root / "data" / "lexicon.json"; }
    std::filesystem::path manifest() const { return root / "data" / "manifest.json"; }
    std::filesystem::path annotations(const std::string& split) const { return root / "data" / (split + ".json"); }
    std::filesystem::path images(const std::string& split) const { return root / "data" / (split + ".images.bin"); }
    std::filesystem::path tnm_checkpoint() const { return root / "checkpoints" / "tnm.json"; }
    std::filesystem::path verb_c_checkpoint() const { return root / "checkpoints" / "verb_c.json"; }
    std::filesystem::path verb_f_checkpoint() const { return root / "checkpoints" / "verb_f.json"; }
    std::filesystem::path gallery() const { return root / "gallery.json"; }
    std::filesystem::path loss_log(const std::string& stage) const { return root / "logs" / (stage + ".loss.csv"); }
    std::filesystem::path predictions(const std::string& split) const { return root / "predictions" / (split + ".json"); }
    std::filesystem::path report(const std::string& split, metrics::Setting s) const {
        return root / "metrics" / (split + "." + metrics::setting_name(s) + ".json");
    }
};

struct Split {
    std::vector<onto::Image> images;
    onto::AnnotationSet annotations;
};

struct SplitSizes {
    std::size_t train = 0, dev = 0, test = 0;
};
SplitSizes split_sizes(const DataConfig& data);

// Writes lexicon, annotations and image bundles for train/dev/test.
void gen_data(const RunConfig& config);

onto::Lexicon load_lexicon_checked(const RunConfig& config);
Split load_split(const RunConfig& config, const onto::Lexicon& lexicon, const std::string& split);

tnm::TnmConfig tnm_config(const RunConfig& config);
cfvm::VerbCConfig verb_c_config(const RunConfig& config);

// Each stage writes its checkpoint (tagged with the config hash) and a loss
// curve, and returns the per-step losses.
num::TrainLog train_tnm_stage(const RunConfig& config);
num::TrainLog train_verb_c_stage(const RunConfig& config);
void build_gallery_stage(const RunConfig& config);
cfvm::VerbFLog train_verb_f_stage(const RunConfig& config);

// Loads the checkpoints, runs Verb-c -> TNM per candidate -> re-ranking for
// every image of the split and writes the prediction dump.
metrics::PredictionDump predict_stage(const RunConfig& config, const std::string& split);

// Evaluates the stored dump of `split` and writes one report per setting.
std::vector<metrics::MetricReport> eval_stage(const RunConfig& config, const std::string& split,
                                              const std::vector<metrics::Setting>& settings);

// Loaders used by the stages; all verify the embedded config hash.
tnm::TnmModel load_tnm(const RunConfig& config, const onto::Lexicon& lexicon);
cfvm::VerbCModel load_verb_c(const RunConfig& config, const onto::Lexicon& lexicon);
cfvm::FineHead load_verb_f(const RunConfig& config);

}  // namespace situ::pipeline
