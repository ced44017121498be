#include "situ/cfvm/rerank.hpp"

#include <algorithm>
#include <numeric>

#include "situ/common/error.hpp"

namespace situ::cfvm {

RerankResult rerank_scores(const std::vector<ScoredCandidate>& candidates, const FineHeadConfig& config) {
    if (candidates.empty()) throw PreconditionError("rerank: no candidates");
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].prob > candidates[i - 1].prob)
            throw PreconditionError("rerank: candidates are not in coarse order");
    RerankResult r;
    if (candidates.front().prob >= config.epsilon) {
        for (const auto& c : candidates) {
            r.order.push_back(c.verb);
            r.scores.push_back(c.prob);
        }
        return r;
    }
    r.reranked = true;
    std::vector<double> score(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double s = 0.0;
        for (const auto& [cos, sim] : candidates[i].support) s += cos * sim;
        if (config.support_mean && !candidates[i].support.empty()) s /= static_cast<double>(candidates[i].support.size());
        score[i] = config.beta * s + config.alpha * candidates[i].prob;
    }
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t i : idx) {
        r.order.push_back(candidates[i].verb);
        r.scores.push_back(score[i]);
    }
    return r;
}

std::vector<std::vector<double>> embed_gallery(const Gallery& gallery, const FineHead& head) {
    std::vector<std::vector<double>> out;
    out.reserve(gallery.size());
    for (const auto& e : gallery.entries)
        out.push_back(head.embed(Tensor::from({1, e.cls_feature.size()}, e.cls_feature)).to_vector());
    return out;
}

RerankResult rerank(const std::vector<RankedVerb>& candidates, const std::vector<SupportSet>& supports,
                    const std::vector<std::vector<double>>& gallery_embeddings, const FineHead& head,
                    const Tensor& query_cls, const FineHeadConfig& config) {
    if (supports.size() != candidates.size()) throw PreconditionError("rerank: one support set per candidate required");
    const auto q = head.embed(query_cls.detach()).to_vector();
    std::vector<ScoredCandidate> scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (supports[i].verb != candidates[i].verb) throw PreconditionError("rerank: support set / candidate mismatch");
        ScoredCandidate c{candidates[i].verb, candidates[i].prob, {}};
        for (const auto& m : supports[i].members) c.support.emplace_back(cosine(q, gallery_embeddings.at(m.entry)), m.score);
        scored.push_back(std::move(c));
    }
    return rerank_scores(scored, config);
}

}  // namespace situ::cfvm
