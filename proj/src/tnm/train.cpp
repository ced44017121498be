#include "situ/tnm/train.hpp"

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::tnm {

num::TrainLog train_tnm(TnmModel& model, std::span<const onto::Image> images,
                        std::span<const onto::AnnotatedImage> annotations, const LossWeights& weights,
                        const num::TrainOptions& options) {
    if (images.size() != annotations.size()) throw PreconditionError("train_tnm: images and annotations differ in length");
    for (std::size_t i = 0; i < images.size(); ++i)
        if (images[i].id != annotations[i].image_id)
            throw PreconditionError("train_tnm: image " + images[i].id + " paired with annotation " +
                                    annotations[i].image_id);
    return num::run_training(model.parameters(), images.size(), options, [&](const std::vector<std::size_t>& batch) {
        Tensor total;
        for (std::size_t i : batch) {
            const auto out = model.forward(images[i], annotations[i].frame.verb);
            const Tensor loss = tnm_loss(out, annotations[i].frame, weights).total;
            total = total.defined() ? num::add(total, loss) : loss;
        }
        return num::scale(total, 1.0 / static_cast<double>(batch.size()));
    });
}

bool predicted_presence(const RoleDetection& det, const LossWeights& weights) {
    if (weights.always_present || weights.presence <= 0.0) return true;
    return det.presence_logit > 0.0;
}

}  // namespace situ::tnm
