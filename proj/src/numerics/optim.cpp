#include "situ/numerics/optim.hpp"

#include <cmath>

#include "situ/common/error.hpp"

namespace situ::num {

OptimState make_optim_state(const std::vector<Tensor>& params, AdamConfig config) {
    OptimState state;
    state.config = config;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads, OptimState& state, double lr) {
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    }
    const AdamConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].mutable_values();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = grads[i];
        if (m.size() != p.size() || (!g.empty() && g.size() != p.size())) {
            throw ShapeError("adam_step: gradient length mismatch for parameter " + std::to_string(i));
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] = p[j] * (1.0 - lr * c.weight_decay) - lr * m_hat / (std::sqrt(v_hat) + c.eps);
        }
        require_finite(p, "adam_step");
    }
}

AdamW::AdamW(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), state_(make_optim_state(params_, config)) {}

void AdamW::step(const GradientMap& grads, double lr) {
    std::vector<std::vector<double>> ordered(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto it = grads.find(params_[i].id());
        if (it != grads.end()) ordered[i] = it->second;
    }
    adam_step(params_, ordered, state_, lr);
}

}  // namespace situ::num
