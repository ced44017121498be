#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <doctest.h>

#include "situ/common/error.hpp"
#include "situ/common/rng.hpp"
#include "situ/metrics/metrics.hpp"
#include "situ/metrics/prediction_io.hpp"
#include "situ/ontology/synth.hpp"

#include "oracles.hpp"

using namespace situ;
using namespace situ::metrics;
using oracle::random_dump;

namespace {

const std::filesystem::path kData = std::filesystem::path(SITU_TEST_DATA) / "metrics";

nlohmann::ordered_json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::ordered_json::parse(in);
}

const std::vector<Setting> kSettings = {Setting::top1, Setting::top5, Setting::gt_verb};
const std::vector<NullGrounding> kNulls = {NullGrounding::presence_false, NullGrounding::exclude};

std::vector<Ratio> ratios(const MetricReport& r) { return {r.verb, r.value, r.value_all, r.grnd, r.grnd_all}; }

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("IoU fixtures") {
    using onto::BBox;
    CHECK(iou(BBox::from_corners(0, 0, 1, 1), BBox::from_corners(0, 0, 1, 1)) == 1.0);
    CHECK(std::abs(iou(BBox::from_corners(0, 0, 2, 2), BBox::from_corners(1, 1, 3, 3)) - 1.0 / 7.0) <= 1e-12);
    CHECK(std::abs(iou(BBox::from_corners(0, 0, 2, 2), BBox::from_corners(1, 1, 2, 2)) - 0.25) <= 1e-12);
    CHECK(iou(BBox::from_corners(0, 0, 1, 1), BBox::from_corners(1, 1, 2, 2)) == 0.0);
    CHECK(kIouThreshold == 0.5);
}

TEST_CASE("role scoring cases") {
    using onto::BBox;
    const auto gold = BBox::from_corners(0.0, 0.0, 0.5, 0.5);
    const std::vector<onto::NounId> nouns = {3, 4};
    // IoU exactly 0.4: the prediction covers 40% of the gold box.
    const auto low = BBox::from_corners(0.0, 0.0, 0.5, 0.2);
    auto s = score_role(3, low, true, nouns, gold);
    CHECK(s.noun_ok);
    CHECK_FALSE(s.grounded_ok);
    s = score_role(4, gold, true, nouns, gold);
    CHECK(s.noun_ok);
    CHECK(s.grounded_ok);
    s = score_role(5, gold, true, nouns, gold);
    CHECK_FALSE(s.noun_ok);
    CHECK_FALSE(s.grounded_ok);
    s = score_role(3, gold, false, nouns, gold);
    CHECK_FALSE(s.grounded_ok);
    s = score_role(3, gold, false, nouns, std::nullopt);
    CHECK(s.noun_ok);
    CHECK(s.grounded_ok);
    s = score_role(3, gold, true, nouns, std::nullopt);
    CHECK_FALSE(s.grounded_ok);
    // IoU uses boxes clipped to the image.
    s = score_role(3, BBox::from_corners(-0.5, -0.5, 0.5, 0.5), true, nouns, gold);
    CHECK(s.grounded_ok);
}

TEST_CASE("the four-image fixture reproduces the golden reports") {
    const auto lex = onto::load_lexicon(kData / "lexicon.json");
    const auto gold = onto::load_annotations(kData / "gold.json", lex);
    const auto dump = read_predictions(kData / "predictions.json", lex);
    require_same_images(dump.predictions, gold);
    for (auto s : kSettings) {
        for (auto g : kNulls) {
            CAPTURE(setting_name(s));
            CAPTURE(null_grounding_name(g));
            const auto report = evaluate(dump.predictions, gold, lex, s, g);
            const auto expected = read_json(kData / (std::string("expected.") + setting_name(s) + "." +
                                                     null_grounding_name(g) + ".json"));
            CHECK(report == report_from_json(expected));
            CHECK(report_to_json(report) == expected);
        }
    }
}

TEST_CASE("monotonicity invariants hold on 100 randomized dumps") {
    onto::SynthSpec spec;
    spec.count = 40;
    spec.absent_prob = 0.2;
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto ds = onto::synth_generate(spec, 100 + trial);
        const auto dump = random_dump(ds, rng);
        onto::AnnotationSet gold;
        for (const auto& s : ds.samples) gold.push_back(s.annotation);
        for (auto g : kNulls) {
            const auto t1 = evaluate(dump, gold, ds.world.lexicon, Setting::top1, g);
            const auto t5 = evaluate(dump, gold, ds.world.lexicon, Setting::top5, g);
            const auto gt = evaluate(dump, gold, ds.world.lexicon, Setting::gt_verb, g);
            const auto r1 = ratios(t1), r5 = ratios(t5), rg = ratios(gt);
            for (std::size_t k = 0; k < r1.size(); ++k) {
                CHECK(r5[k].value() >= r1[k].value());
                CHECK(rg[k].value() >= r5[k].value());
            }
            for (const auto& r : {t1, t5, gt}) {
                if (g == NullGrounding::presence_false) CHECK(r.grnd.value() <= r.value.value());
                CHECK(r.grnd_all.value() <= r.value_all.value());
            }
            CHECK(gt.verb.value() == 1.0);
        }
    }
}

TEST_CASE("missing predictions and frames are schema errors") {
    const auto lex = onto::load_lexicon(kData / "lexicon.json");
    const auto gold = onto::load_annotations(kData / "gold.json", lex);
    auto dump = read_predictions(kData / "predictions.json", lex);
    auto partial = dump.predictions;
    partial.pop_back();
    CHECK_THROWS_AS(evaluate(partial, gold, lex, Setting::top1), SchemaError);
    CHECK_THROWS_AS(require_same_images(partial, gold), SchemaError);
    auto no_frame = dump.predictions;
    no_frame[3].frames.erase(lex.verb_id("cooking"));
    CHECK_NOTHROW(evaluate(no_frame, gold, lex, Setting::top1));
    CHECK_THROWS_AS(evaluate(no_frame, gold, lex, Setting::top5), SchemaError);
    CHECK_THROWS_AS(evaluate({}, {}, lex, Setting::top1), PreconditionError);
}

TEST_CASE("prediction dumps and reports round-trip") {
    const auto lex = onto::load_lexicon(kData / "lexicon.json");
    const auto dump = read_predictions(kData / "predictions.json", lex);
    const auto path = std::filesystem::temp_directory_path() / "situ_predictions_roundtrip.json";
    write_predictions(path, dump, lex);
    const auto again = read_predictions(path, lex);
    CHECK(again.predictions == dump.predictions);
    std::filesystem::remove(path);

    const auto gold = onto::load_annotations(kData / "gold.json", lex);
    const auto report = evaluate(dump.predictions, gold, lex, Setting::top5);
    CHECK(report_from_json(report_to_json(report)) == report);
    const auto table = format_table({report});
    CHECK(table.find("top5") != std::string::npos);
    CHECK(table.find("90.00") != std::string::npos);
}

TEST_CASE("setting and convention names parse back") {
    for (auto s : kSettings) CHECK(parse_setting(setting_name(s)) == s);
    for (auto g : kNulls) CHECK(parse_null_grounding(null_grounding_name(g)) == g);
    CHECK_THROWS_AS(parse_setting("top3"), ConfigError);
}

}  // TEST_SUITE
