// Acceptance suite: one PASS/FAIL line per criterion. Usage:
//   situ_acceptance <work_dir>
// Criteria 6 to 9 train models under <work_dir>; the rest are self-contained.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "situ/cfvm/rerank.hpp"
#include "situ/cfvm/train.hpp"
#include "situ/common/error.hpp"
#include "situ/metrics/prediction_io.hpp"
#include "situ/numerics/grad_check.hpp"
#include "situ/numerics/ops.hpp"
#include "situ/pipeline/stages.hpp"
#include "situ/tnm/geometry.hpp"
#include "situ/tnm/loss.hpp"
#include "situ/tnm/train.hpp"

using namespace situ;
namespace fs = std::filesystem;

namespace {

fs::path g_work;
const fs::path kData = fs::path(SITU_TEST_DATA) / "metrics";

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records a failed expectation; the first few are kept for the report.
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (pass || detail.size() < 200) detail += (detail.empty() ? "" : "; ") + what;
        pass = false;
    }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Gradient correctness of the three training losses.
Outcome gradients() {
    Outcome o;
    num::GradCheckOptions opts;
    opts.eps = 1e-5;
    opts.tol = 1e-4;
    double worst = 0.0;
    auto record = [&](const char* name, const num::GradCheckReport& r) {
        worst = std::max(worst, r.max_rel_error);
        o.expect(r.passed && r.max_rel_error < 1e-4, std::string(name) + ": " + r.worst);
    };

    onto::SynthSpec spec;
    spec.count = 2;
    spec.absent_prob = 0.5;
    const auto ds = onto::synth_generate(spec, 6);
    tnm::TnmConfig tc;
    tc.model_dim = 4;
    tc.num_heads = 2;
    tc.ff_dim = 4;
    tc.encoder_layers = 1;
    tc.decoder_layers = 1;
    const tnm::TnmModel model(tc, ds.world.lexicon, 4);
    for (const auto& s : ds.samples) {
        for (bool always : {false, true}) {
            tnm::LossWeights w;
            w.always_present = always;
            auto loss = [&] { return tnm::tnm_loss(model.forward(s.image, s.annotation.frame.verb), s.annotation.frame, w).total; };
            record("tnm", num::grad_check(loss, num::tensors_of(model.parameters()), opts));
        }
    }

    cfvm::VerbCConfig vc;
    vc.model_dim = 4;
    vc.num_heads = 2;
    vc.ff_dim = 4;
    vc.encoder_layers = 1;
    const cfvm::VerbCModel verb_c(vc, ds.world.lexicon, 1);
    const auto& s = ds.samples[1];
    auto xe = [&] { return num::sum(num::cross_entropy(verb_c.forward(s.image).logits, {s.annotation.frame.verb})); };
    record("verb_c", num::grad_check(xe, num::tensors_of(verb_c.parameters()), opts));

    cfvm::FineHead head(4, 3);
    Rng rng(4);
    auto row = [&] {
        std::vector<double> v(4);
        for (auto& x : v) x = rng.normal();
        return num::Tensor::row(v);
    };
    const auto a = row(), p = row(), n = row();
    auto triplet = [&] { return cfvm::triplet_loss(a, p, n, head, 2.5); };
    o.expect(triplet().item() > 0.0, "triplet hinge inactive");
    record("triplet", num::grad_check(triplet, num::tensors_of(head.parameters()), opts));
    o.detail = (o.pass ? "" : o.detail + "; ") + fmt("max rel error %.2e", worst);
    return o;
}

Outcome geometry() {
    Outcome o;
    using onto::BBox;
    auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    const auto unit = BBox::from_corners(0, 0, 1, 1), touch = BBox::from_corners(1, 1, 2, 2);
    const auto big = BBox::from_corners(0, 0, 2, 2), offset = BBox::from_corners(1, 1, 3, 3);
    o.expect(metrics::iou(unit, unit) == 1.0 && tnm::giou(unit, unit) == 1.0, "identical");
    o.expect(near(tnm::giou(unit, touch), -0.5), "corner touching");
    o.expect(near(metrics::iou(big, touch), 0.25) && near(tnm::giou(big, touch), 0.25), "nested quarter");
    o.expect(near(metrics::iou(big, offset), 1.0 / 7.0), "offset");
    Rng rng(1);
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto a = oracle::random_box(rng), b = oracle::random_box(rng);
        const double g = tnm::giou(a, b), u = metrics::iou(a, b);
        const bool ok = std::abs(g - tnm::giou(b, a)) <= 1e-12 && std::abs(u - metrics::iou(b, a)) <= 1e-12 &&
                        g <= u + 1e-15 && g >= -1.0 && g <= 1.0 && u >= 0.0 && u <= 1.0;
        bad += ok ? 0 : 1;
    }
    o.expect(bad == 0, std::to_string(bad) + " random pairs violate a property");
    if (o.pass) o.detail = "fixtures and 10^4 random pairs";
    return o;
}

Outcome metric_oracle() {
    Outcome o;
    const auto lex = onto::load_lexicon(kData / "lexicon.json");
    const auto gold = onto::load_annotations(kData / "gold.json", lex);
    const auto dump = metrics::read_predictions(kData / "predictions.json", lex);
    for (auto s : {metrics::Setting::top1, metrics::Setting::top5, metrics::Setting::gt_verb}) {
        for (auto g : {metrics::NullGrounding::presence_false, metrics::NullGrounding::exclude}) {
            const std::string name = std::string(metrics::setting_name(s)) + "." + metrics::null_grounding_name(g);
            std::ifstream in(kData / ("expected." + name + ".json"));
            const auto expected = nlohmann::ordered_json::parse(in);
            o.expect(metrics::report_to_json(metrics::evaluate(dump.predictions, gold, lex, s, g)) == expected, name);
        }
    }
    onto::SynthSpec spec;
    spec.count = 40;
    spec.absent_prob = 0.2;
    Rng rng(12);
    std::size_t violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto ds = onto::synth_generate(spec, 100 + trial);
        const auto preds = oracle::random_dump(ds, rng);
        onto::AnnotationSet ann;
        for (const auto& s : ds.samples) ann.push_back(s.annotation);
        for (auto g : {metrics::NullGrounding::presence_false, metrics::NullGrounding::exclude}) {
            const auto t1 = metrics::evaluate(preds, ann, ds.world.lexicon, metrics::Setting::top1, g);
            const auto t5 = metrics::evaluate(preds, ann, ds.world.lexicon, metrics::Setting::top5, g);
            const auto gt = metrics::evaluate(preds, ann, ds.world.lexicon, metrics::Setting::gt_verb, g);
            auto all = [](const metrics::MetricReport& r) {
                return std::vector<double>{r.verb.value(), r.value.value(), r.value_all.value(), r.grnd.value(), r.grnd_all.value()};
            };
            const auto a1 = all(t1), a5 = all(t5), ag = all(gt);
            for (std::size_t k = 0; k < a1.size(); ++k) violations += (a5[k] < a1[k]) + (ag[k] < a5[k]);
            for (const auto* r : {&t1, &t5, &gt}) {
                if (g == metrics::NullGrounding::presence_false) violations += r->grnd.value() > r->value.value();
                violations += r->grnd_all.value() > r->value_all.value();
            }
        }
    }
    o.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
    if (o.pass) o.detail = "golden fixture (6 reports) and 100 randomized dumps";
    return o;
}

Outcome retrieval() {
    Outcome o;
    using oracle::entry;
    using oracle::unit_at;
    cfvm::Gallery ties;
    for (const char* id : {"z", "b", "m", "a"}) ties.add(entry(id, 0, {unit_at(0.6)}));
    ties.add(entry("c", 0, {unit_at(0.8)}));
    std::vector<std::string> ids;
    for (const auto& m : cfvm::retrieve_support({{1.0, 0.0}}, 0, ties, 4).members) ids.push_back(ties.entries[m.entry].image_id);
    o.expect(ids == std::vector<std::string>{"c", "a", "b", "m"}, "tie order");

    Rng rng(11);
    std::size_t mismatches = 0, queries = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t verbs = 1 + rng.below(4), roles = 1 + rng.below(3), dim = 2 + rng.below(4);
        const std::size_t n = rng.below(40);
        cfvm::Gallery g;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::vector<double>> feats(roles, std::vector<double>(dim));
            for (auto& f : feats)
                for (auto& x : f) x = rng.below(5) == 0 ? std::round(rng.normal()) : rng.normal();
            char id[16];
            std::snprintf(id, sizeof(id), "im%03zu", rng.below(1000));
            g.add(entry(id, rng.below(verbs), feats));
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
            const auto got = cfvm::retrieve_support(query, v, g, m).members;
            const auto want = oracle::brute_force(query, v, g, m);
            bool same = got.size() == want.size();
            for (std::size_t k = 0; same && k < got.size(); ++k)
                same = g.entries[got[k].entry].image_id == g.entries[want[k].entry].image_id &&
                       std::abs(got[k].score - want[k].score) <= 1e-12;
            mismatches += same ? 0 : 1;
            ++queries;
        }
    }
    o.expect(mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(queries) + " queries differ");
    if (o.pass) o.detail = std::to_string(queries) + " queries over 10^3 galleries";
    return o;
}

Outcome rerank_contracts() {
    Outcome o;
    const cfvm::FineHeadConfig cfg;
    o.expect(cfg.epsilon == 0.4 && cfg.alpha == 0.5 && cfg.beta == 0.5 && cfg.top_n == 5 && cfg.support_m == 10,
             "default parameters");
    const std::vector<cfvm::ScoredCandidate> confident = {{3, 0.5, {{0.1, 0.1}}}, {1, 0.3, {{1.0, 1.0}}}};
    const auto kept = cfvm::rerank_scores(confident, cfg);
    o.expect(!kept.reranked && kept.final_verb() == 3, "confident candidate changed");
    const std::vector<cfvm::ScoredCandidate> hand = {{0, 0.3, {{0.1, 0.5}}}, {1, 0.2, {{1.0, 1.0}}}};
    const auto h = cfvm::rerank_scores(hand, cfg);
    o.expect(h.reranked && std::abs(h.scores[0] - 0.6) <= 1e-12 && h.final_verb() == 1, "hand case 0.6");

    Rng rng(6);
    std::size_t bad = 0;
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<cfvm::ScoredCandidate> c;
        std::vector<double> probs(5);
        const double cap = trial % 5 == 0 ? 1.0 : 0.35;
        for (auto& p : probs) p = rng.uniform(0.0, cap);
        std::sort(probs.rbegin(), probs.rend());
        for (std::size_t k = 0; k < 5; ++k) {
            cfvm::ScoredCandidate sc{k, probs[k], {}};
            for (std::size_t s = 0; s < 1 + rng.below(10); ++s) sc.support.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
            c.push_back(sc);
        }
        auto zero = cfg;
        zero.beta = 0.0;
        bad += cfvm::rerank_scores(c, zero).final_verb() != 0;
        auto scaled = cfg;
        scaled.alpha *= 3.7;
        scaled.beta *= 3.7;
        bad += cfvm::rerank_scores(c, scaled).final_verb() != cfvm::rerank_scores(c, cfg).final_verb();
        if (probs[0] >= cfg.epsilon) bad += cfvm::rerank_scores(c, cfg).final_verb() != 0;
    }
    o.expect(bad == 0, std::to_string(bad) + " randomized contract violations");
    if (o.pass) o.detail = "gate, hand case, beta = 0 and scaling over 500 fixtures";
    return o;
}

Outcome overfit() {
    Outcome o;
    const auto c = pipeline::default_config();
    const auto world = onto::make_world(c.data.synth, 1);
    const auto samples = onto::render_samples(world, 8 * 50, 2);
    std::vector<onto::Image> images;
    std::vector<onto::AnnotatedImage> anns;
    for (const auto& s : samples) {
        images.push_back(s.image);
        anns.push_back(s.annotation);
    }
    std::vector<std::size_t> per_verb(world.lexicon.num_verbs());
    for (const auto& a : anns) ++per_verb[a.frame.verb];
    o.expect(per_verb.size() == 8 && std::all_of(per_verb.begin(), per_verb.end(), [](auto n) { return n == 50; }),
             "dataset is not 8 x 50");
    o.expect(c.train_tnm.steps <= 2000 && c.train_verb_c.steps <= 2000, "more than 2000 steps");

    const pipeline::RunConfig& rc = c;
    cfvm::VerbCModel verb_c(pipeline::verb_c_config(rc), world.lexicon, rc.seed + 2);
    cfvm::train_verb_c(verb_c, images, anns, pipeline::train_options(rc.train_verb_c, rc.seed + 3));
    std::size_t verb_ok = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto probs = verb_c.forward(images[i]).probs;
        verb_ok += cfvm::top_n(probs.values(), 1)[0].verb == anns[i].frame.verb;
    }

    tnm::TnmModel model(pipeline::tnm_config(rc), world.lexicon, rc.seed);
    tnm::train_tnm(model, images, anns, rc.loss, pipeline::train_options(rc.train_tnm, rc.seed + 1));
    std::size_t value = 0, grnd = 0, roles = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto dets = model.forward(images[i], anns[i].frame.verb).detections();
        for (std::size_t r = 0; r < dets.size(); ++r) {
            const auto& g = anns[i].frame.roles[r];
            const auto s = metrics::score_role(dets[r].noun, dets[r].box, tnm::predicted_presence(dets[r], rc.loss),
                                               g.gold_nouns, g.box);
            value += s.noun_ok;
            grnd += s.grounded_ok;
            ++roles;
        }
    }
    const double top1 = double(verb_ok) / images.size(), v = double(value) / roles, gr = double(grnd) / roles;
    o.expect(verb_ok == images.size(), "Verb-c top-1 below 100%");
    o.expect(v >= 0.95, "value below 95%");
    o.expect(gr >= 0.80, "grnd below 80%");
    o.detail = fmt("Verb-c top-1 %.2f%%, value %.2f%%, grnd %.2f%%", 100 * top1, 100 * v, 100 * gr) +
               (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

// The coarse-to-fine benchmark: confusable verb pairs, every eligible dev
// image rendered as a planted confusion.
pipeline::RunConfig c2f_config(const std::string& name) {
    auto c = pipeline::default_config();
    c.data.count = 640;
    c.data.eval_hard_fraction = 1.0;
    c.out_dir = (g_work / name).string();
    return c;
}

void run_pipeline(const pipeline::RunConfig& c) {
    fs::remove_all(c.out_dir);
    pipeline::gen_data(c);
    pipeline::train_tnm_stage(c);
    pipeline::train_verb_c_stage(c);
    pipeline::build_gallery_stage(c);
    pipeline::train_verb_f_stage(c);
    for (const char* split : {"dev", "test"}) {
        pipeline::predict_stage(c, split);
        pipeline::eval_stage(c, split, {metrics::Setting::top1, metrics::Setting::top5, metrics::Setting::gt_verb});
    }
}

Outcome coarse_to_fine() {
    Outcome o;
    auto c = c2f_config("c2f_a");
    run_pipeline(c);
    const auto lex = pipeline::load_lexicon_checked(c);
    const auto gold = pipeline::load_split(c, lex, "dev").annotations;
    const auto manifest = nlohmann::json::parse(std::ifstream(pipeline::Paths(c.out_dir).manifest()));
    std::set<std::string> planted;
    for (const auto& id : manifest["splits"]["dev"]["planted_confusion"]) planted.insert(id.get<std::string>());

    struct Acc {
        std::size_t all = 0, planted = 0;
    };
    auto accuracy = [&](double epsilon) {
        auto run = c;
        run.cfvm.epsilon = epsilon;
        const auto dump = pipeline::predict_stage(run, "dev");
        Acc a;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            const bool ok = dump.predictions[i].ranked.at(0).verb == gold[i].frame.verb;
            a.all += ok;
            a.planted += ok && planted.count(gold[i].image_id);
        }
        return a;
    };
    // With epsilon = 0 the gate never opens, so the output is Verb-c alone.
    const auto coarse = accuracy(0.0);
    const auto fine = accuracy(c.cfvm.epsilon);
    const double n = gold.size(), np = std::max<std::size_t>(planted.size(), 1);
    o.expect(fine.all >= coarse.all, "re-ranking lowers dev accuracy");
    o.expect(fine.planted > coarse.planted, "no gain on the planted subset");
    o.detail = fmt("dev top-1 %.2f%% -> %.2f%%, planted (n=%.0f) ", 100 * coarse.all / n, 100 * fine.all / n, np) +
               fmt("%.2f%% -> %.2f%%", 100 * coarse.planted / np, 100 * fine.planted / np);
    return o;
}

double gt_verb_value(const pipeline::RunConfig& c) {
    const auto lex = pipeline::load_lexicon_checked(c);
    const auto model = pipeline::load_tnm(c, lex);
    std::size_t ok = 0, total = 0;
    for (const char* split : {"dev", "test"}) {
        const auto s = pipeline::load_split(c, lex, split);
        for (std::size_t i = 0; i < s.images.size(); ++i) {
            const auto& f = s.annotations[i].frame;
            const auto dets = model.forward(s.images[i], f.verb).detections();
            for (std::size_t r = 0; r < dets.size(); ++r) {
                ok += metrics::score_role(dets[r].noun, dets[r].box, true, f.roles[r].gold_nouns, f.roles[r].box).noun_ok;
                ++total;
            }
        }
    }
    return double(ok) / total;
}

Outcome ablations() {
    Outcome o;
    // Construction check: one shared row per role id, one row per (verb, role) otherwise.
    auto base = pipeline::default_config();
    const auto world = onto::make_world(base.data.synth, base.seed);
    const auto& lex = world.lexicon;
    std::size_t slots = 0;
    for (onto::VerbId v = 0; v < lex.num_verbs(); ++v) slots += lex.roles_of(v).size();
    const tnm::TnmModel shared(pipeline::tnm_config(base), lex, 1);
    o.expect(shared.queries().role_table.rows() == lex.num_roles(), "shared table size");
    for (onto::VerbId v = 0; v < lex.num_verbs(); ++v)
        for (std::size_t s = 0; s < lex.roles_of(v).size(); ++s)
            o.expect(shared.queries().role_row(v, s) == lex.roles_of(v)[s], "shared row lookup");
    auto sep_cfg = base;
    sep_cfg.model.share_role_queries = false;
    o.expect(tnm::TnmModel(pipeline::tnm_config(sep_cfg), lex, 1).queries().role_table.rows() == slots,
             "separate table size");

    std::string detail;
    for (std::uint64_t seed : {1, 2, 3}) {
        double values[3];
        for (int variant = 0; variant < 3; ++variant) {
            auto c = base;
            c.seed = seed;
            c.model.share_role_queries = variant != 1;
            c.model.use_verb_query = variant != 2;
            c.out_dir = (g_work / ("ablation_" + std::to_string(seed) + "_" + std::to_string(variant))).string();
            fs::remove_all(c.out_dir);
            pipeline::gen_data(c);
            pipeline::train_tnm_stage(c);
            values[variant] = gt_verb_value(c);
        }
        o.expect(values[1] <= values[0], "seed " + std::to_string(seed) + ": unshared role queries score higher");
        o.expect(values[2] <= values[0], "seed " + std::to_string(seed) + ": no verb query scores higher");
        detail += (detail.empty() ? "" : ", ") + fmt("seed %.0f: %.2f/%.2f/%.2f", double(seed), 100 * values[0],
                                                      100 * values[1], 100 * values[2]);
    }
    o.detail = "GT-verb value (%) full/unshared/no-verb-query, " + detail + (o.pass ? "" : " (" + o.detail + ")");
    return o;
}

Outcome determinism() {
    Outcome o;
    const auto a = c2f_config("c2f_a");
    const auto b = c2f_config("c2f_b");
    if (!fs::exists(pipeline::Paths(a.out_dir).report("test", metrics::Setting::gt_verb))) run_pipeline(a);
    run_pipeline(b);
    std::size_t compared = 0;
    for (const char* split : {"dev", "test"}) {
        for (auto s : {metrics::Setting::top1, metrics::Setting::top5, metrics::Setting::gt_verb}) {
            const auto pa = pipeline::Paths(a.out_dir).report(split, s), pb = pipeline::Paths(b.out_dir).report(split, s);
            o.expect(fs::exists(pa) && slurp(pa) == slurp(pb), pa.filename().string() + " differs");
            ++compared;
        }
        o.expect(slurp(pipeline::Paths(a.out_dir).predictions(split)) == slurp(pipeline::Paths(b.out_dir).predictions(split)),
                 std::string(split) + " predictions differ");
    }
    if (o.pass) o.detail = std::to_string(compared) + " metric reports and both prediction dumps byte-identical";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    g_work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "situ_acceptance";
    fs::create_directories(g_work);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradients},   {"geometry oracles", geometry},
        {"metric oracle equivalence", metric_oracle}, {"retrieval oracle", retrieval},
        {"re-rank contracts", rerank_contracts},      {"overfit smoke test", overfit},
        {"coarse-to-fine gain", coarse_to_fine},      {"ablation direction", ablations},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        // Time limits: 1 min for the gradient checks, 10 min for the overfit run.
        if (i == 0 && secs >= 60.0) o.expect(false, "took longer than 1 min");
        if (i == 5 && secs >= 600.0) o.expect(false, "took longer than 10 min");
        std::printf("criterion %zu: %s  %s [%.1fs] %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                    o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
