#pragma once

#include <vector>

#include "situ/transformer/layers.hpp"

namespace situ::tf {

// true = attend, false = padded. At least one position must be attendable.
using PadMask = std::vector<bool>;

PadMask all_valid(std::size_t n);

struct MultiHeadAttention {
    std::size_t num_heads = 1;
    Linear q_proj, k_proj, v_proj, out_proj;

    static MultiHeadAttention make(std::size_t dim, std::size_t heads, Rng& rng);
    // All projections identity with zero bias.
    static MultiHeadAttention identity(std::size_t dim, std::size_t heads);

    std::size_t dim() const { return q_proj.in_dim(); }
    void collect(num::ParamList& out, const std::string& prefix) const;
};

struct AttentionResult {
    Tensor output;                 // [q x d]
    std::vector<Tensor> weights;   // per head, [q x k], rows sum to 1 over unmasked keys
};

// Scaled dot-product attention per head (scale 1/sqrt(d/heads)); masked keys
// get zero weight. Heads are concatenated and passed through out_proj.
AttentionResult mha_with_weights(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                 const PadMask& key_mask, const MultiHeadAttention& attn);

Tensor mha(const Tensor& queries, const Tensor& keys, const Tensor& values, const PadMask& key_mask,
           const MultiHeadAttention& attn);

}  // namespace situ::tf
