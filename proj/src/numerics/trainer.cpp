#include "situ/numerics/trainer.hpp"

#include <cmath>
#include <numeric>

#include "situ/common/error.hpp"
#include "situ/common/rng.hpp"

namespace situ::num {

double learning_rate_at(const TrainOptions& options, std::size_t step) {
    if (options.lr_drop_step > 0 && step >= options.lr_drop_step) return options.lr * options.lr_drop_factor;
    return options.lr;
}

namespace {

void clip_gradients(GradientMap& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& [id, g] : grads)
        for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double f = max_norm / norm;
    for (auto& [id, g] : grads)
        for (double& v : g) v *= f;
}

}  // namespace

TrainLog run_training(const ParamList& params, std::size_t dataset_size, const TrainOptions& options,
                      const BatchLossFn& batch_loss) {
    if (dataset_size == 0) throw PreconditionError("training set is empty");
    if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(options.lr > 0.0)) throw ConfigError("learning rate must be positive");
    AdamW optimizer(tensors_of(params), AdamConfig{.weight_decay = options.weight_decay});
    Rng rng(options.seed);
    std::vector<std::size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = dataset_size;

    TrainLog log;
    log.losses.reserve(options.steps);
    for (std::size_t step = 0; step < options.steps; ++step) {
        std::vector<std::size_t> batch;
        while (batch.size() < std::min(options.batch_size, dataset_size)) {
            if (cursor == dataset_size) {
                for (std::size_t i = dataset_size; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }
        try {
            Tape tape;
            Tape::Scope scope(tape);
            const Tensor loss = batch_loss(batch);
            if (!loss.defined()) {
                log.losses.push_back(std::nan(""));
                continue;
            }
            GradientMap grads = tape.backward(loss);
            if (options.clip_norm > 0.0) clip_gradients(grads, options.clip_norm);
            optimizer.step(grads, learning_rate_at(options, step));
            log.losses.push_back(loss.item());
            if (options.on_step) options.on_step(step, loss.item());
        } catch (const NumericError& e) {
            throw NumericError("training step " + std::to_string(step) + ": " + e.what());
        }
    }
    return log;
}

}  // namespace situ::num
