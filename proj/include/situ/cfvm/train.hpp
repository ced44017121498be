#pragma once

#include <span>
#include <vector>

#include "situ/cfvm/fine_head.hpp"
#include "situ/cfvm/retrieval.hpp"
#include "situ/cfvm/verb_c.hpp"
#include "situ/numerics/trainer.hpp"

namespace situ::cfvm {

// Gallery entry indices usable as positives / negatives for one anchor.
struct TripletPools {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
};

// I+ is the gold-verb support set without the anchor itself; I- is the union
// (first occurrence order) of the support sets of the other candidates.
TripletPools mine_triplets(std::size_t anchor_index, const Gallery& gallery, const SupportSet& gold_support,
                           const std::vector<SupportSet>& candidate_supports);

// Pools for every gallery entry: Verb-c proposes the top-N verbs for each
// training image, the TNM is run under each candidate to retrieve its support
// set. images[i] must correspond to gallery.entries[i].
std::vector<TripletPools> mine_all_triplets(std::span<const onto::Image> images, const Gallery& gallery,
                                            const VerbCModel& verb_c, const tnm::TnmModel& tnm,
                                            const FineHeadConfig& config, std::size_t workers = 1);

struct VerbFLog {
    num::TrainLog train;
    std::size_t usable_anchors = 0;  // anchors with non-empty I+ and I-
};

// Triplet training of phi on frozen gallery CLS features. Each step samples
// one (positive, negative) pair per anchor with a seeded RNG.
VerbFLog train_verb_f(FineHead& head, const Gallery& gallery, const std::vector<TripletPools>& pools,
                      const FineHeadConfig& config, const num::TrainOptions& options);

}  // namespace situ::cfvm
