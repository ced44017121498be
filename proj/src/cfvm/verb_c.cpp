#include "situ/cfvm/verb_c.hpp"

#include <algorithm>
#include <numeric>

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"
#include "situ/transformer/position.hpp"

namespace situ::cfvm {

VerbCModel::VerbCModel(const VerbCConfig& config, const onto::Lexicon& lexicon, std::uint64_t seed)
    : config_(config), verb_names_(lexicon.verb_names()) {
    if (config.model_dim % 4 != 0) throw ConfigError("model_dim must be a multiple of 4");
    if (config.image_size % config.patch != 0) throw ConfigError("image_size must be a multiple of patch");
    if (verb_names_.empty()) throw ConfigError("lexicon has no verbs");
    Rng rng(seed);
    const std::size_t d = config.model_dim;
    backbone_ = tnm::PatchEmbed::make(config.patch, config.channels, d, rng);
    cls_token_ = tf::normal_parameter(1, d, 0.02, rng);
    encoder_ = tf::EncoderStack::make({config.encoder_layers, d, config.num_heads, config.ff_dim}, rng);
    classifier_ = config.zero_init_classifier ? tf::Linear::zeros(d, verb_names_.size())
                                              : tf::Linear::xavier(d, verb_names_.size(), rng);
    if (config.use_position) {
        const std::size_t g = config.image_size / config.patch;
        pos_ = num::concat_rows({Tensor::zeros({1, d}), tf::sinusoidal_pe(g, g, d)});
    }
}

VerbCOutput VerbCModel::forward(const onto::Image& image) const {
    if (image.height != config_.image_size || image.width != config_.image_size)
        throw ShapeError("image " + image.id + " is not " + std::to_string(config_.image_size) + " pixels square");
    const Tensor tokens = num::concat_rows({cls_token_, backbone_.tokens(image)});
    const Tensor encoded = tf::encode(tokens, encoder_, tf::all_valid(tokens.rows()), pos_);
    VerbCOutput out;
    out.cls_feature = num::slice_rows(encoded, 0, 1);
    out.logits = classifier_.forward(out.cls_feature);
    out.probs = num::softmax(out.logits, 1);
    return out;
}

num::ParamList VerbCModel::parameters() const {
    num::ParamList out;
    backbone_.collect(out, "verb_c.backbone");
    out.push_back({"verb_c.cls", cls_token_, {}});
    encoder_.collect(out, "verb_c.encoder");
    classifier_.collect(out, "verb_c.classifier");
    return out;
}

std::vector<RankedVerb> top_n(std::span<const double> probs, std::size_t n) {
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    order.resize(std::min(n, order.size()));
    std::vector<RankedVerb> out;
    for (auto v : order) out.push_back({v, probs[v]});
    return out;
}

num::TrainLog train_verb_c(VerbCModel& model, std::span<const onto::Image> images,
                           std::span<const onto::AnnotatedImage> annotations, const num::TrainOptions& options) {
    if (images.size() != annotations.size()) throw PreconditionError("train_verb_c: images and annotations differ in length");
    return num::run_training(model.parameters(), images.size(), options, [&](const std::vector<std::size_t>& batch) {
        Tensor total;
        for (std::size_t i : batch) {
            if (images[i].id != annotations[i].image_id)
                throw PreconditionError("train_verb_c: image " + images[i].id + " paired with annotation " +
                                        annotations[i].image_id);
            const Tensor loss = num::sum(num::cross_entropy(model.forward(images[i]).logits, {annotations[i].frame.verb}));
            total = total.defined() ? num::add(total, loss) : loss;
        }
        return num::scale(total, 1.0 / static_cast<double>(batch.size()));
    });
}

}  // namespace situ::cfvm
