#pragma once

#include <cstdint>
#include <vector>

#include "situ/ontology/images.hpp"
#include "situ/ontology/annotations.hpp"
#include "situ/tnm/model.hpp"
#include "situ/numerics/trainer.hpp"

namespace situ::cfvm {

using num::Tensor;

struct VerbCConfig {
    std::size_t image_size = 24;
    std::size_t channels = 3;
    std::size_t patch = 4;
    std::size_t model_dim = 64;
    std::size_t num_heads = 4;
    std::size_t ff_dim = 128;
    std::size_t encoder_layers = 6;
    bool use_position = true;
    // A zero classifier makes every verb equally likely before training.
    bool zero_init_classifier = false;
};

struct VerbCOutput {
    Tensor logits;       // [1 x V]
    Tensor probs;        // [1 x V]
    Tensor cls_feature;  // [1 x d], encoder output at the CLS token
};

// Coarse verb classifier: patch backbone, a learnable CLS token prepended to
// the patch tokens, a transformer encoder and a linear classifier on the CLS
// output. The CLS token gets no position encoding.
class VerbCModel {
public:
    VerbCModel(const VerbCConfig& config, const onto::Lexicon& lexicon, std::uint64_t seed);

    const VerbCConfig& config() const { return config_; }
    std::size_t num_verbs() const { return verb_names_.size(); }
    VerbCOutput forward(const onto::Image& image) const;
    num::ParamList parameters() const;

private:
    VerbCConfig config_;
    std::vector<std::string> verb_names_;
    tnm::PatchEmbed backbone_;
    Tensor cls_token_;
    tf::EncoderStack encoder_;
    tf::Linear classifier_;
    Tensor pos_;  // [(1 + n) x d], CLS row zero
};

struct RankedVerb {
    onto::VerbId verb = 0;
    double prob = 0.0;
};

// The n most probable verbs, ties broken by ascending verb id.
std::vector<RankedVerb> top_n(std::span<const double> probs, std::size_t n);

// Cross-entropy on the gold verb, mean over the batch.
num::TrainLog train_verb_c(VerbCModel& model, std::span<const onto::Image> images,
                           std::span<const onto::AnnotatedImage> annotations, const num::TrainOptions& options);

}  // namespace situ::cfvm
