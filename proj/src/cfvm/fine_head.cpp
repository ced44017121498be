#include "situ/cfvm/fine_head.hpp"

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::cfvm {

void validate(const FineHeadConfig& c) {
    if (!(c.margin > 0.0)) throw ConfigError("margin must be positive");
    if (c.support_m < 1) throw ConfigError("support_m must be at least 1");
    if (c.top_n < 1) throw ConfigError("top_n must be at least 1");
    if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) throw ConfigError("alpha and beta must be non-negative");
}

FineHead::FineHead(std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    fc1_ = tf::Linear::xavier(dim, dim, rng);
    fc2_ = tf::Linear::xavier(dim, dim, rng);
}

Tensor FineHead::embed(const Tensor& features) const {
    return num::l2_normalize_rows(fc2_.forward(num::relu(fc1_.forward(features))));
}

num::ParamList FineHead::parameters() const {
    num::ParamList out;
    fc1_.collect(out, "verb_f.fc1");
    fc2_.collect(out, "verb_f.fc2");
    return out;
}

Tensor triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative, const FineHead& head,
                    double margin) {
    using namespace num;
    if (anchor.rows() != 1 || positive.rows() != 1 || negative.rows() != 1)
        throw ShapeError("triplet_loss expects single-row features");
    const Tensor a = head.embed(anchor.detach());
    const Tensor p = head.embed(positive.detach());
    const Tensor n = head.embed(negative.detach());
    return sum(relu(add_scalar(sub(cosine_rows(a, n), cosine_rows(a, p)), margin)));
}

}  // namespace situ::cfvm
