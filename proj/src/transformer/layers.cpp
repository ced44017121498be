#include "situ/transformer/layers.hpp"

#include <cmath>

#include "situ/numerics/ops.hpp"

namespace situ::tf {

Linear Linear::xavier(std::size_t in, std::size_t out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (auto& v : w) v = rng.uniform(-a, a);
    return {Tensor::parameter({in, out}, std::move(w)), Tensor::parameter({1, out}, std::vector<double>(out, 0.0))};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
    return {Tensor::parameter({in, out}, std::vector<double>(in * out, 0.0)),
            Tensor::parameter({1, out}, std::vector<double>(out, 0.0))};
}

Linear Linear::identity(std::size_t dim) {
    Linear l = zeros(dim, dim);
    auto w = l.weight.mutable_values();
    for (std::size_t i = 0; i < dim; ++i) w[i * dim + i] = 1.0;
    return l;
}

Tensor Linear::forward(const Tensor& x) const { return num::add_row(num::matmul(x, weight), bias); }

void Linear::collect(num::ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".weight", weight, {}});
    out.push_back({prefix + ".bias", bias, {}});
}

LayerNorm LayerNorm::make(std::size_t dim) {
    return {Tensor::parameter({1, dim}, std::vector<double>(dim, 1.0)),
            Tensor::parameter({1, dim}, std::vector<double>(dim, 0.0))};
}

Tensor LayerNorm::forward(const Tensor& x) const { return num::layer_norm(x, gamma, beta); }

void LayerNorm::collect(num::ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + ".gamma", gamma, {}});
    out.push_back({prefix + ".beta", beta, {}});
}

FeedForward FeedForward::make(std::size_t dim, std::size_t hidden, Rng& rng) {
    return {Linear::xavier(dim, hidden, rng), Linear::xavier(hidden, dim, rng)};
}

Tensor FeedForward::forward(const Tensor& x) const { return fc2.forward(num::relu(fc1.forward(x))); }

void FeedForward::collect(num::ParamList& out, const std::string& prefix) const {
    fc1.collect(out, prefix + ".fc1");
    fc2.collect(out, prefix + ".fc2");
}

Tensor normal_parameter(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = stddev * rng.normal();
    return Tensor::parameter({rows, cols}, std::move(v));
}

}  // namespace situ::tf
