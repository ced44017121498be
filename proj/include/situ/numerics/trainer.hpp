#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "situ/numerics/checkpoint.hpp"
#include "situ/numerics/optim.hpp"

namespace situ::num {

struct TrainOptions {
    std::size_t steps = 1000;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::size_t lr_drop_step = 0;  // 0: constant learning rate
    double lr_drop_factor = 0.1;
    double clip_norm = 0.0;        // global gradient norm cap, 0 = off
    std::uint64_t seed = 0;
    std::function<void(std::size_t step, double loss)> on_step;
};

struct TrainLog {
    std::vector<double> losses;  // one per step
};

double learning_rate_at(const TrainOptions& options, std::size_t step);

// Minibatch AdamW loop. Each epoch visits a seeded permutation of
// [0, dataset_size) in batches; batch_loss builds the batch loss on the
// active tape and may return an undefined tensor to skip the batch (e.g. when
// none of its items are usable). Numerical failures are rethrown with the
// step number.
using BatchLossFn = std::function<Tensor(const std::vector<std::size_t>& batch)>;
TrainLog run_training(const ParamList& params, std::size_t dataset_size, const TrainOptions& options,
                      const BatchLossFn& batch_loss);

}  // namespace situ::num
