#pragma once

#include <span>

#include "situ/numerics/trainer.hpp"
#include "situ/ontology/annotations.hpp"
#include "situ/tnm/loss.hpp"

namespace situ::tnm {

// Trains the TNM on gold-verb frames; batch loss is the mean per-image loss.
// images[i] must carry annotations[i].image_id.
num::TrainLog train_tnm(TnmModel& model, std::span<const onto::Image> images,
                        std::span<const onto::AnnotatedImage> annotations, const LossWeights& weights,
                        const num::TrainOptions& options);

// Presence decision used at inference time.
bool predicted_presence(const RoleDetection& det, const LossWeights& weights);

}  // namespace situ::tnm
