#include "situ/cfvm/train.hpp"

#include <set>

#include "situ/common/error.hpp"
#include "situ/common/parallel.hpp"
#include "situ/numerics/ops.hpp"

namespace situ::cfvm {

TripletPools mine_triplets(std::size_t anchor_index, const Gallery& gallery, const SupportSet& gold_support,
                           const std::vector<SupportSet>& candidate_supports) {
    const auto& anchor = gallery.entries.at(anchor_index);
    if (gold_support.verb != anchor.verb) throw PreconditionError("mine_triplets: gold support set has the wrong verb");
    TripletPools pools;
    for (const auto& m : gold_support.members)
        if (m.entry != anchor_index) pools.positives.push_back(m.entry);
    std::set<std::size_t> seen;
    for (const auto& s : candidate_supports) {
        if (s.verb == anchor.verb) continue;
        for (const auto& m : s.members)
            if (seen.insert(m.entry).second) pools.negatives.push_back(m.entry);
    }
    return pools;
}

std::vector<TripletPools> mine_all_triplets(std::span<const onto::Image> images, const Gallery& gallery,
                                            const VerbCModel& verb_c, const tnm::TnmModel& tnm,
                                            const FineHeadConfig& config, std::size_t workers) {
    if (images.size() != gallery.size()) throw PreconditionError("mine_all_triplets: one image per gallery entry required");
    std::vector<TripletPools> out(images.size());
    parallel_for(images.size(), workers, [&](std::size_t i) {
        const auto& entry = gallery.entries[i];
        if (images[i].id != entry.image_id) throw PreconditionError("mine_all_triplets: image order differs from gallery");
        const auto probs = verb_c.forward(images[i]).probs.to_vector();
        const auto candidates = top_n(probs, config.top_n);
        const auto gold = retrieve_support(entry.role_features, entry.verb, gallery, config.support_m, entry.image_id);
        const num::Tensor memory = tnm.encode_image(images[i]);
        std::vector<SupportSet> supports;
        for (const auto& c : candidates) {
            if (c.verb == entry.verb) continue;
            supports.push_back(
                retrieve_support(role_feature_rows(tnm.decode_verb(memory, c.verb)), c.verb, gallery, config.support_m));
        }
        out[i] = mine_triplets(i, gallery, gold, supports);
    });
    return out;
}

VerbFLog train_verb_f(FineHead& head, const Gallery& gallery, const std::vector<TripletPools>& pools,
                      const FineHeadConfig& config, const num::TrainOptions& options) {
    validate(config);
    if (pools.size() != gallery.size()) throw PreconditionError("train_verb_f: one pool per gallery entry required");
    std::vector<std::size_t> anchors;
    for (std::size_t i = 0; i < pools.size(); ++i)
        if (!pools[i].positives.empty() && !pools[i].negatives.empty()) anchors.push_back(i);
    VerbFLog log;
    log.usable_anchors = anchors.size();
    if (anchors.empty()) throw PreconditionError("train_verb_f: no anchor has both positives and negatives");

    auto row = [&](std::size_t idx) {
        const auto& f = gallery.entries[idx].cls_feature;
        return Tensor::from({1, f.size()}, f);
    };
    Rng sampler(options.seed ^ 0x7f4a7c159e3779b9ULL);
    log.train = num::run_training(head.parameters(), anchors.size(), options, [&](const std::vector<std::size_t>& batch) {
        Tensor total;
        for (std::size_t b : batch) {
            const std::size_t a = anchors[b];
            const auto& pool = pools[a];
            const std::size_t p = pool.positives[sampler.below(pool.positives.size())];
            const std::size_t n = pool.negatives[sampler.below(pool.negatives.size())];
            const Tensor loss = triplet_loss(row(a), row(p), row(n), head, config.margin);
            total = total.defined() ? num::add(total, loss) : loss;
        }
        return num::scale(total, 1.0 / static_cast<double>(batch.size()));
    });
    return log;
}

}  // namespace situ::cfvm
