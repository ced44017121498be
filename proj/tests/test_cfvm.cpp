#include <algorithm>
#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "situ/cfvm/rerank.hpp"
#include "situ/cfvm/train.hpp"
#include "situ/common/error.hpp"
#include "situ/numerics/grad_check.hpp"
#include "situ/numerics/ops.hpp"
#include "situ/ontology/synth.hpp"

#include "oracles.hpp"

using namespace situ;
using namespace situ::cfvm;
using num::Tensor;
using namespace situ::oracle;

namespace {

onto::Lexicon two_verb_lexicon() {
    onto::Lexicon lex;
    lex.add_noun("thing");
    lex.add_verb("a", {"r1"});
    lex.add_verb("b", {"r1"});
    return lex;
}

}  // namespace

TEST_SUITE("cfvm") {

TEST_CASE("top_n sorts by probability and breaks ties by verb id") {
    const std::vector<double> p = {0.5, 0.3, 0.2};
    const auto top = top_n(p, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].verb == 0);
    CHECK(top[1].verb == 1);
    const std::vector<double> tied = {0.2, 0.4, 0.4, 0.0};
    const auto t = top_n(tied, 5);
    REQUIRE(t.size() == 4);
    CHECK(t[0].verb == 1);
    CHECK(t[1].verb == 2);
    CHECK(t[2].verb == 0);
}

TEST_CASE("role similarity averages per-role cosines") {
    CHECK(role_similarity({{1, 0}, {1, 0}}, {{2, 0}, {0, 3}}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2}) == 0.0);
}

TEST_CASE("support retrieval keeps the M best entries of the verb") {
    Gallery g;
    g.add(entry("i1", 0, {unit_at(0.9)}));
    g.add(entry("i2", 0, {unit_at(0.5)}));
    g.add(entry("i3", 0, {unit_at(0.7)}));
    g.add(entry("i4", 1, {unit_at(1.0)}));
    const auto s = retrieve_support({{1.0, 0.0}}, 0, g, 2);
    REQUIRE(s.members.size() == 2);
    CHECK(s.members[0].entry == 0);
    CHECK(s.members[0].score == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(s.members[1].entry == 2);
    CHECK(s.members[1].score == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(retrieve_support({{1.0, 0.0}}, 0, g, 10).members.size() == 3);
    CHECK(retrieve_support({{1.0, 0.0}}, 2, g, 10).members.empty());
    const auto ex = retrieve_support({{1.0, 0.0}}, 0, g, 2, "i1");
    CHECK(ex.members[0].entry == 2);
}

TEST_CASE("equal scores are ordered by ascending image id") {
    Gallery g;
    for (const char* id : {"z", "b", "m", "a"}) g.add(entry(id, 0, {unit_at(0.6)}));
    g.add(entry("c", 0, {unit_at(0.8)}));
    const auto s = retrieve_support({{1.0, 0.0}}, 0, g, 4);
    std::vector<std::string> ids;
    for (const auto& m : s.members) ids.push_back(g.entries[m.entry].image_id);
    CHECK(ids == std::vector<std::string>{"c", "a", "b", "m"});
}

TEST_CASE("retrieval equals a brute-force full sort on 10^3 random galleries") {
    Rng rng(11);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t verbs = 1 + rng.below(4), roles = 1 + rng.below(3), dim = 2 + rng.below(4);
        const std::size_t n = rng.below(40);
        Gallery g;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::vector<double>> feats(roles, std::vector<double>(dim));
            for (auto& f : feats)
                for (auto& x : f) x = rng.below(5) == 0 ? std::round(rng.normal()) : rng.normal();
            char id[16];
            std::snprintf(id, sizeof(id), "im%03zu", rng.below(1000));
            g.add(entry(id, rng.below(verbs), feats));
            // Duplicates create exact score ties.
            if (rng.below(6) == 0) {
                std::snprintf(id, sizeof(id), "im%03zu", rng.below(1000));
                g.add(entry(id, g.entries.back().verb, feats));
            }
        }
        std::vector<std::vector<double>> query(roles, std::vector<double>(dim));
        for (auto& f : query)
            for (auto& x : f) x = rng.normal() + 0.1;
        const onto::VerbId v = rng.below(verbs);
        for (std::size_t m = 1; m <= g.size() + 1; ++m) {
            const auto got = retrieve_support(query, v, g, m).members;
            const auto want = brute_force(query, v, g, m);
            bool same = got.size() == want.size();
            for (std::size_t k = 0; same && k < got.size(); ++k)
                same = g.entries[got[k].entry].image_id == g.entries[want[k].entry].image_id &&
                       std::abs(got[k].score - want[k].score) <= 1e-12;
            mismatches += same ? 0 : 1;
        }
    }
    CHECK(mismatches == 0);
}

TEST_CASE("triplet loss hand cases") {
    FineHead head(2, 1);
    make_identity(head);
    const Tensor a = Tensor::row({1.0, 0.0});
    CHECK(triplet_loss(a, Tensor::row(unit_at(0.9)), Tensor::row(unit_at(0.5)), head, 0.2).item() == 0.0);
    const Tensor same = Tensor::row(unit_at(0.6));
    CHECK(std::abs(triplet_loss(a, same, same, head, 0.2).item() - 0.2) <= 1e-12);
    CHECK(std::abs(triplet_loss(a, Tensor::row(unit_at(0.5)), Tensor::row(unit_at(0.9)), head, 0.2).item() - 0.6) <= 1e-12);
}

TEST_CASE("triplet loss gradients through phi match finite differences") {
    FineHead head(4, 3);
    Rng rng(4);
    auto row = [&] {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.normal();
        return Tensor::row(v);
    };
    const Tensor a = row(), p = row(), n = row();
    // Margin large enough that the hinge is active.
    auto loss = [&] { return triplet_loss(a, p, n, head, 2.5); };
    REQUIRE(loss().item() > 0.0);
    const auto report = num::grad_check(loss, num::tensors_of(head.parameters()));
    CAPTURE(report.worst);
    CHECK(report.passed);
}

TEST_CASE("phi embeddings are unit length") {
    FineHead head(6, 2);
    Rng rng(5);
    std::vector<double> v(18);
    for (auto& x : v) x = rng.normal();
    const auto e = head.embed(Tensor::from({3, 6}, v));
    for (std::size_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < 6; ++c) s += e.at(i, c) * e.at(i, c);
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("re-rank contracts") {
    FineHeadConfig cfg;

    SUBCASE("a confident top candidate is kept without re-ranking") {
        const std::vector<ScoredCandidate> c = {{3, 0.5, {{0.1, 0.1}}}, {1, 0.3, {{1.0, 1.0}}}};
        const auto r = rerank_scores(c, cfg);
        CHECK_FALSE(r.reranked);
        CHECK(r.final_verb() == 3);
        CHECK(r.order == std::vector<onto::VerbId>{3, 1});
    }
    SUBCASE("hand case: 0.5 * 1 * 1 + 0.5 * 0.2 = 0.6") {
        const std::vector<ScoredCandidate> c = {{0, 0.3, {{0.1, 0.5}}}, {1, 0.2, {{1.0, 1.0}}}};
        const auto r = rerank_scores(c, cfg);
        CHECK(r.reranked);
        CHECK(r.final_verb() == 1);
        CHECK(std::abs(r.scores[0] - 0.6) <= 1e-12);
        CHECK(std::abs(r.scores[1] - (0.5 * 0.05 + 0.5 * 0.3)) <= 1e-12);
    }
    SUBCASE("support_mean averages instead of summing") {
        auto mean_cfg = cfg;
        mean_cfg.support_mean = true;
        const std::vector<ScoredCandidate> c = {{0, 0.3, {{1.0, 1.0}, {0.5, 0.4}}}};
        CHECK(std::abs(rerank_scores(c, mean_cfg).scores[0] - (0.5 * 0.6 + 0.5 * 0.3)) <= 1e-12);
    }
    SUBCASE("candidates out of coarse order are rejected") {
        const std::vector<ScoredCandidate> c = {{0, 0.1, {}}, {1, 0.2, {}}};
        CHECK_THROWS_AS(rerank_scores(c, cfg), PreconditionError);
    }
    SUBCASE("beta = 0 keeps the coarse argmax and common scaling keeps any argmax") {
        Rng rng(6);
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<ScoredCandidate> c;
            std::vector<double> probs(5);
            for (auto& p : probs) p = rng.uniform(0.0, 0.35);
            std::sort(probs.rbegin(), probs.rend());
            for (std::size_t k = 0; k < 5; ++k) {
                ScoredCandidate sc{k, probs[k], {}};
                for (std::size_t s = 0; s < 1 + rng.below(10); ++s) sc.support.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
                c.push_back(sc);
            }
            auto zero = cfg;
            zero.beta = 0.0;
            CHECK(rerank_scores(c, zero).final_verb() == 0);
            auto scaled = cfg;
            scaled.alpha *= 3.7;
            scaled.beta *= 3.7;
            CHECK(rerank_scores(c, scaled).final_verb() == rerank_scores(c, cfg).final_verb());
        }
    }
}

TEST_CASE("rerank scores supports with phi cosines from the gallery") {
    FineHead head(2, 1);
    make_identity(head);
    Gallery g;
    g.add(entry("g0", 0, {{1, 0}}, {1.0, 0.0}));
    g.add(entry("g1", 1, {{1, 0}}, {0.0, 1.0}));
    const auto emb = embed_gallery(g, head);
    const std::vector<RankedVerb> cands = {{0, 0.35}, {1, 0.30}};
    const std::vector<SupportSet> supports = {{0, {{0, 0.5}}}, {1, {{1, 0.9}}}};
    const Tensor query = Tensor::row(unit_at(0.2));  // close to g1's CLS direction
    const auto r = rerank(cands, supports, emb, head, query, {});
    CHECK(r.reranked);
    CHECK(r.final_verb() == 1);
    CHECK(std::abs(r.scores[0] - (0.5 * std::sqrt(1 - 0.04) * 0.9 + 0.5 * 0.30)) <= 1e-12);
    // Forced into the gate, the coarse order stands.
    FineHeadConfig gate;
    gate.epsilon = 0.3;
    CHECK(rerank(cands, supports, emb, head, query, gate).final_verb() == 0);
}

TEST_CASE("triplet pools exclude the anchor and merge negatives in order") {
    Gallery g;
    for (int i = 0; i < 6; ++i) g.add(entry("e" + std::to_string(i), i < 3 ? 0 : 1 + i % 2, {{1, 0}}));
    const SupportSet gold{0, {{1, 0.9}, {0, 0.8}, {2, 0.7}}};
    const std::vector<SupportSet> cands = {gold, {1, {{3, 0.5}, {5, 0.4}}}, {2, {{4, 0.3}, {3, 0.2}}}};
    const auto pools = mine_triplets(0, g, gold, cands);
    CHECK(pools.positives == std::vector<std::size_t>{1, 2});
    CHECK(pools.negatives == std::vector<std::size_t>{3, 5, 4});
    CHECK_THROWS_AS(mine_triplets(0, g, cands[1], cands), PreconditionError);
}

TEST_CASE("Verb-c outputs a distribution and its cross-entropy gradient is exact") {
    const auto ds = onto::synth_generate({.count = 2}, 8);
    VerbCConfig cfg;
    cfg.model_dim = 4;
    cfg.num_heads = 2;
    cfg.ff_dim = 4;
    cfg.encoder_layers = 1;
    const VerbCModel model(cfg, ds.world.lexicon, 1);
    const auto out = model.forward(ds.samples[0].image);
    CHECK(out.probs.shape() == num::Shape{1, ds.world.lexicon.num_verbs()});
    CHECK(out.cls_feature.shape() == num::Shape{1, 4});
    double s = 0.0;
    for (double p : out.probs.values()) s += p;
    CHECK(std::abs(s - 1.0) <= 1e-12);
    auto loss = [&] { return num::sum(num::cross_entropy(model.forward(ds.samples[1].image).logits, {ds.samples[1].annotation.frame.verb})); };
    const auto report = num::grad_check(loss, num::tensors_of(model.parameters()));
    CAPTURE(report.worst);
    CHECK(report.passed);

    cfg.zero_init_classifier = true;
    const VerbCModel flat(cfg, ds.world.lexicon, 1);
    const auto uniform = flat.forward(ds.samples[0].image);
    for (double p : uniform.probs.values())
        CHECK(p == doctest::Approx(1.0 / ds.world.lexicon.num_verbs()));
}

TEST_CASE("galleries round-trip and refuse stale or malformed inputs") {
    const auto ds = onto::synth_generate({.count = 8}, 9);
    std::vector<onto::Image> images;
    std::vector<onto::AnnotatedImage> anns;
    for (const auto& s : ds.samples) {
        images.push_back(s.image);
        anns.push_back(s.annotation);
    }
    VerbCConfig vc;
    vc.model_dim = 8;
    vc.num_heads = 2;
    vc.ff_dim = 8;
    vc.encoder_layers = 1;
    tnm::TnmConfig tc;
    tc.model_dim = 8;
    tc.num_heads = 2;
    tc.ff_dim = 8;
    tc.encoder_layers = 1;
    tc.decoder_layers = 1;
    const VerbCModel verb_c(vc, ds.world.lexicon, 1);
    const tnm::TnmModel model(tc, ds.world.lexicon, 2);
    const auto g1 = build_gallery(images, anns, verb_c, model, 1);
    const auto g2 = build_gallery(images, anns, verb_c, model, 3);
    REQUIRE(g1.size() == 8);
    CHECK(g1.entries == g2.entries);
    CHECK(g1.of_verb(anns[0].frame.verb).size() == 1);
    require_fresh(g1, verb_c, model);

    const auto path = std::filesystem::temp_directory_path() / "situ_gallery_test.json";
    save_gallery(path, g1, ds.world.lexicon);
    const auto loaded = load_gallery(path, ds.world.lexicon);
    CHECK(loaded.entries == g1.entries);
    CHECK(loaded.checkpoint_hash == g1.checkpoint_hash);

    const tnm::TnmModel other(tc, ds.world.lexicon, 3);
    CHECK_THROWS_AS(require_fresh(loaded, verb_c, other), SchemaError);
    CHECK_THROWS_AS(load_gallery(path, two_verb_lexicon()), SchemaError);
    std::filesystem::remove(path);
}

TEST_CASE("Verb-f training is deterministic in its seed") {
    Gallery g;
    Rng rng(10);
    for (int i = 0; i < 12; ++i) {
        std::vector<double> cls(4);
        for (auto& x : cls) x = rng.normal() + (i % 2 ? 1.0 : -1.0);
        g.add(entry("e" + std::to_string(i), i % 2, {{1, 0}}, cls));
    }
    std::vector<TripletPools> pools(12);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j)
            if (j != i) (j % 2 == i % 2 ? pools[i].positives : pools[i].negatives).push_back(j);
    num::TrainOptions o;
    o.steps = 40;
    o.batch_size = 4;
    o.lr = 1e-2;
    o.seed = 5;
    FineHead h1(4, 7), h2(4, 7);
    const auto l1 = train_verb_f(h1, g, pools, {}, o), l2 = train_verb_f(h2, g, pools, {}, o);
    CHECK(l1.usable_anchors == 12);
    CHECK(l1.train.losses == l2.train.losses);
    CHECK(num::params_digest(h1.parameters()) == num::params_digest(h2.parameters()));
}

TEST_CASE("fine head config validation") {
    CHECK_NOTHROW(validate(FineHeadConfig{}));
    CHECK_THROWS_AS(validate(FineHeadConfig{.margin = 0.0}), ConfigError);
    CHECK_THROWS_AS(validate(FineHeadConfig{.support_m = 0}), ConfigError);
    CHECK_THROWS_AS(validate(FineHeadConfig{.epsilon = 1.5}), ConfigError);
    const FineHeadConfig d;
    CHECK(d.epsilon == 0.4);
    CHECK(d.alpha == 0.5);
    CHECK(d.beta == 0.5);
    CHECK(d.margin == 0.2);
    CHECK(d.support_m == 10);
    CHECK(d.top_n == 5);
}

}  // TEST_SUITE
