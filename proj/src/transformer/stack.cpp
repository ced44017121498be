#include "situ/transformer/stack.hpp"

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::tf {

void validate(const StackConfig& config) {
    if (config.model_dim == 0 || config.num_heads == 0 || config.ff_dim == 0) {
        throw ConfigError("transformer dims must be positive");
    }
    if (config.model_dim % config.num_heads != 0) throw ConfigError("model_dim must be divisible by num_heads");
}

namespace {

std::vector<double> mask_factors(const PadMask& mask) {
    std::vector<double> f(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) f[i] = mask[i] ? 1.0 : 0.0;
    return f;
}

}  // namespace

EncoderStack EncoderStack::make(const StackConfig& config, Rng& rng) {
    validate(config);
    EncoderStack s{config, {}, LayerNorm::make(config.model_dim)};
    for (std::size_t i = 0; i < config.num_layers; ++i) {
        s.layers.push_back({LayerNorm::make(config.model_dim), LayerNorm::make(config.model_dim),
                            MultiHeadAttention::make(config.model_dim, config.num_heads, rng),
                            FeedForward::make(config.model_dim, config.ff_dim, rng)});
    }
    return s;
}

void EncoderStack::collect(num::ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + ".layer" + std::to_string(i);
        layers[i].norm1.collect(out, p + ".norm1");
        layers[i].norm2.collect(out, p + ".norm2");
        layers[i].self_attn.collect(out, p + ".self_attn");
        layers[i].ff.collect(out, p + ".ff");
    }
    if (!layers.empty()) final_norm.collect(out, prefix + ".final_norm");
}

Tensor encode(const Tensor& tokens, const EncoderStack& stack, const PadMask& mask, const Tensor& pos) {
    if (tokens.cols() != stack.config.model_dim) throw ShapeError("encode: token dim differs from model_dim");
    if (pos.defined() && pos.shape() != tokens.shape()) throw ShapeError("encode: position encoding shape mismatch");
    if (mask.size() != tokens.rows()) throw ShapeError("encode: mask length mismatch");
    Tensor x = tokens;
    for (const auto& layer : stack.layers) {
        const Tensor h = layer.norm1.forward(x);
        const Tensor qk = pos.defined() ? num::add(h, pos) : h;
        x = num::add(x, mha(qk, qk, h, mask, layer.self_attn));
        x = num::add(x, layer.ff.forward(layer.norm2.forward(x)));
    }
    if (!stack.layers.empty()) x = stack.final_norm.forward(x);
    return x;
}

DecoderStack DecoderStack::make(const StackConfig& config, Rng& rng) {
    validate(config);
    DecoderStack s{config, {}, LayerNorm::make(config.model_dim)};
    for (std::size_t i = 0; i < config.num_layers; ++i) {
        s.layers.push_back({LayerNorm::make(config.model_dim), LayerNorm::make(config.model_dim),
                            LayerNorm::make(config.model_dim),
                            MultiHeadAttention::make(config.model_dim, config.num_heads, rng),
                            MultiHeadAttention::make(config.model_dim, config.num_heads, rng),
                            FeedForward::make(config.model_dim, config.ff_dim, rng)});
    }
    return s;
}

void DecoderStack::collect(num::ParamList& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string p = prefix + ".layer" + std::to_string(i);
        layers[i].norm1.collect(out, p + ".norm1");
        layers[i].norm2.collect(out, p + ".norm2");
        layers[i].norm3.collect(out, p + ".norm3");
        layers[i].self_attn.collect(out, p + ".self_attn");
        layers[i].cross_attn.collect(out, p + ".cross_attn");
        layers[i].ff.collect(out, p + ".ff");
    }
    if (!layers.empty()) final_norm.collect(out, prefix + ".final_norm");
}

Tensor decode(const Tensor& queries, const Tensor& memory, const DecoderStack& stack, const PadMask& query_mask,
              const PadMask& memory_mask, const Tensor& memory_pos) {
    const std::size_t d = stack.config.model_dim;
    if (queries.cols() != d || memory.cols() != d) throw ShapeError("decode: dim differs from model_dim");
    if (query_mask.size() != queries.rows() || memory_mask.size() != memory.rows()) {
        throw ShapeError("decode: mask length mismatch");
    }
    if (memory_pos.defined() && memory_pos.shape() != memory.shape()) throw ShapeError("decode: memory pos mismatch");
    if (stack.layers.empty()) return queries;

    const auto keep = mask_factors(query_mask);
    const Tensor memory_keys = memory_pos.defined() ? num::add(memory, memory_pos) : memory;
    Tensor t = queries;
    for (const auto& layer : stack.layers) {
        const Tensor h1 = layer.norm1.forward(t);
        t = num::add(t, mha(h1, h1, h1, query_mask, layer.self_attn));
        const Tensor h2 = layer.norm2.forward(t);
        t = num::add(t, mha(h2, memory_keys, memory, memory_mask, layer.cross_attn));
        t = num::add(t, layer.ff.forward(layer.norm3.forward(t)));
        t = num::scale_rows(t, keep);
    }
    return num::scale_rows(stack.final_norm.forward(t), keep);
}

}  // namespace situ::tf
