#pragma once

#include <optional>
#include <vector>

#include "situ/transformer/attention.hpp"

namespace situ::tf {

struct StackConfig {
    std::size_t num_layers = 2;
    std::size_t model_dim = 64;
    std::size_t num_heads = 4;
    std::size_t ff_dim = 128;
};

void validate(const StackConfig& config);

// Pre-norm self-attention layer. Position encodings, when given, are added to
// the attention queries and keys (not the values) at every layer.
struct EncoderLayer {
    LayerNorm norm1, norm2;
    MultiHeadAttention self_attn;
    FeedForward ff;
};

struct EncoderStack {
    StackConfig config;
    std::vector<EncoderLayer> layers;
    LayerNorm final_norm;  // applied only when num_layers > 0

    static EncoderStack make(const StackConfig& config, Rng& rng);
    void collect(num::ParamList& out, const std::string& prefix) const;
};

// tokens [n x d]; pos empty or [n x d]; mask length n.
Tensor encode(const Tensor& tokens, const EncoderStack& stack, const PadMask& mask, const Tensor& pos = {});

// Pre-norm decoder layer: self-attention over queries, cross-attention to the
// memory (keys get the memory position encodings), feed-forward.
struct DecoderLayer {
    LayerNorm norm1, norm2, norm3;
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ff;
};

struct DecoderStack {
    StackConfig config;
    std::vector<DecoderLayer> layers;
    LayerNorm final_norm;

    static DecoderStack make(const StackConfig& config, Rng& rng);
    void collect(num::ParamList& out, const std::string& prefix) const;
};

// queries [q x d], memory [n x d]. Rows of padded query slots come out as 0.
Tensor decode(const Tensor& queries, const Tensor& memory, const DecoderStack& stack, const PadMask& query_mask,
              const PadMask& memory_mask, const Tensor& memory_pos = {});

}  // namespace situ::tf
