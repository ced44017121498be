#pragma once

#include <utility>
#include <vector>

#include "situ/cfvm/fine_head.hpp"
#include "situ/cfvm/retrieval.hpp"
#include "situ/cfvm/verb_c.hpp"

namespace situ::cfvm {

// One coarse candidate with its support evidence as (cos(phi(q), phi(g_k)), S) pairs.
struct ScoredCandidate {
    onto::VerbId verb = 0;
    double prob = 0.0;
    std::vector<std::pair<double, double>> support;
};

struct RerankResult {
    std::vector<onto::VerbId> order;  // final ranking of the candidates
    std::vector<double> scores;       // aligned with order: p^r, or the coarse prob when not re-ranked
    bool reranked = false;
    onto::VerbId final_verb() const { return order.front(); }
};

// Candidates must be in coarse order (prob descending). If the top
// probability reaches epsilon the coarse order stands. Otherwise
//   p^r(v) = beta * sum_k cos_k * S_k + alpha * p(v)
// (the sum becomes a mean with support_mean) and candidates are sorted by p^r,
// ties keeping coarse order.
RerankResult rerank_scores(const std::vector<ScoredCandidate>& candidates, const FineHeadConfig& config);

// phi-embeddings of every gallery CLS feature, row per entry.
std::vector<std::vector<double>> embed_gallery(const Gallery& gallery, const FineHead& head);

RerankResult rerank(const std::vector<RankedVerb>& candidates, const std::vector<SupportSet>& supports,
                    const std::vector<std::vector<double>>& gallery_embeddings, const FineHead& head,
                    const Tensor& query_cls, const FineHeadConfig& config);

}  // namespace situ::cfvm
