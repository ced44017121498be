#pragma once

#include <cstdint>
#include <vector>

#include "situ/numerics/tape.hpp"
#include "situ/numerics/tensor.hpp"

namespace situ::num {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct OptimState {
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;
};

OptimState make_optim_state(const std::vector<Tensor>& params, AdamConfig config = {});

// One bias-corrected Adam update with decoupled weight decay:
//   p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// grads[i] may be empty, meaning the parameter received no gradient.
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, OptimState& state, double lr);

// Owns the parameter list and state; pulls gradients out of a GradientMap.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamConfig config = {});

    void step(const GradientMap& grads, double lr);
    const OptimState& state() const { return state_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    OptimState state_;
};

}  // namespace situ::num
