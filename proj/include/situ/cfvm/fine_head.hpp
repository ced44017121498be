#pragma once

#include <cstdint>

#include "situ/numerics/checkpoint.hpp"
#include "situ/transformer/layers.hpp"

namespace situ::cfvm {

using num::Tensor;

struct FineHeadConfig {
    std::size_t top_n = 5;       // N
    std::size_t support_m = 10;  // M
    double alpha = 0.5;
    double beta = 0.5;
    double epsilon = 0.4;
    double margin = 0.2;         // tau
    // Average instead of sum over the support set in the re-rank score.
    bool support_mean = false;
};

// Throws ConfigError unless tau > 0, M >= 1, N >= 1 and 0 <= epsilon <= 1.
void validate(const FineHeadConfig& config);

// phi: two-layer MLP d -> d -> d with ReLU; outputs are L2-normalized rows.
class FineHead {
public:
    FineHead(std::size_t dim, std::uint64_t seed);

    std::size_t dim() const { return fc1_.in_dim(); }
    Tensor embed(const Tensor& features) const;  // [k x d] -> [k x d]
    num::ParamList parameters() const;

private:
    tf::Linear fc1_, fc2_;
};

// max(0, tau + cos(phi(a), phi(n)) - cos(phi(a), phi(p))) for single-row
// inputs. The inputs are detached, so only phi receives gradient.
Tensor triplet_loss(const Tensor& anchor, const Tensor& positive, const Tensor& negative, const FineHead& head,
                    double margin);

}  // namespace situ::cfvm
