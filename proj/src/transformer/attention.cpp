#include "situ/transformer/attention.hpp"

#include <algorithm>
#include <cmath>

#include "situ/common/error.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::tf {

PadMask all_valid(std::size_t n) { return PadMask(n, true); }

MultiHeadAttention MultiHeadAttention::make(std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0) throw ConfigError("model dim must be divisible by the head count");
    return {heads, Linear::xavier(dim, dim, rng), Linear::xavier(dim, dim, rng), Linear::xavier(dim, dim, rng),
            Linear::xavier(dim, dim, rng)};
}

MultiHeadAttention MultiHeadAttention::identity(std::size_t dim, std::size_t heads) {
    if (heads == 0 || dim % heads != 0) throw ConfigError("model dim must be divisible by the head count");
    return {heads, Linear::identity(dim), Linear::identity(dim), Linear::identity(dim), Linear::identity(dim)};
}

void MultiHeadAttention::collect(num::ParamList& out, const std::string& prefix) const {
    q_proj.collect(out, prefix + ".q");
    k_proj.collect(out, prefix + ".k");
    v_proj.collect(out, prefix + ".v");
    out_proj.collect(out, prefix + ".o");
}

AttentionResult mha_with_weights(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                 const PadMask& key_mask, const MultiHeadAttention& attn) {
    const std::size_t d = attn.dim();
    if (queries.cols() != d || keys.cols() != d || values.cols() != d) throw ShapeError("mha: feature dim mismatch");
    if (keys.rows() != values.rows()) throw ShapeError("mha: key/value count mismatch");
    if (key_mask.size() != keys.rows()) throw ShapeError("mha: mask length must equal key count");
    if (std::none_of(key_mask.begin(), key_mask.end(), [](bool b) { return b; })) {
        throw PreconditionError("mha: all key positions are masked");
    }
    const std::size_t heads = attn.num_heads;
    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Tensor q = attn.q_proj.forward(queries);
    const Tensor k = attn.k_proj.forward(keys);
    const Tensor v = attn.v_proj.forward(values);

    AttentionResult result;
    std::vector<Tensor> head_out;
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = heads == 1 ? q : num::slice_cols(q, h * dh, (h + 1) * dh);
        const Tensor kh = heads == 1 ? k : num::slice_cols(k, h * dh, (h + 1) * dh);
        const Tensor vh = heads == 1 ? v : num::slice_cols(v, h * dh, (h + 1) * dh);
        const Tensor scores = num::scale(num::matmul(qh, num::transpose(kh)), scale);
        const Tensor weights = num::masked_softmax(scores, key_mask);
        head_out.push_back(num::matmul(weights, vh));
        result.weights.push_back(weights);
    }
    const Tensor merged = heads == 1 ? head_out.front() : num::concat_cols(head_out);
    result.output = attn.out_proj.forward(merged);
    return result;
}

Tensor mha(const Tensor& queries, const Tensor& keys, const Tensor& values, const PadMask& key_mask,
           const MultiHeadAttention& attn) {
    return mha_with_weights(queries, keys, values, key_mask, attn).output;
}

}  // namespace situ::tf
