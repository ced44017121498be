#pragma once

#include <string>

#include "situ/common/rng.hpp"
#include "situ/numerics/checkpoint.hpp"
#include "situ/numerics/tensor.hpp"

namespace situ::tf {

using num::Tensor;

// y = x W + b with W stored [in x out].
struct Linear {
    Tensor weight;
    Tensor bias;

    static Linear xavier(std::size_t in, std::size_t out, Rng& rng);
    static Linear zeros(std::size_t in, std::size_t out);
    static Linear identity(std::size_t dim);

    std::size_t in_dim() const { return weight.rows(); }
    std::size_t out_dim() const { return weight.cols(); }
    Tensor forward(const Tensor& x) const;
    void collect(num::ParamList& out, const std::string& prefix) const;
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    static LayerNorm make(std::size_t dim);
    Tensor forward(const Tensor& x) const;
    void collect(num::ParamList& out, const std::string& prefix) const;
};

struct FeedForward {
    Linear fc1;
    Linear fc2;

    static FeedForward make(std::size_t dim, std::size_t hidden, Rng& rng);
    Tensor forward(const Tensor& x) const;  // fc2(relu(fc1(x)))
    void collect(num::ParamList& out, const std::string& prefix) const;
};

// Gaussian-initialized [rows x cols] parameter.
Tensor normal_parameter(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

}  // namespace situ::tf
