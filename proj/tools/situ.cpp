// Command-line driver: data generation, staged training, gallery building,
// prediction and evaluation. See README.md for a walkthrough.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "situ/common/error.hpp"
#include "situ/numerics/kernels.hpp"
#include "situ/pipeline/stages.hpp"

namespace fs = std::filesystem;
using namespace situ;

namespace {

struct Overrides {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers, top_n, support_m;
    std::optional<double> alpha, beta, epsilon, margin;
    bool support_mean = false;
    bool no_verb_query = false;
    bool no_shared_role_queries = false;
    bool always_present = false;
    std::string null_grounding;
    std::string kernels;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "Run configuration JSON (defaults to <out>/config.json if present)");
    cmd->add_option("-o,--out", o.out_dir, "Output directory");
    cmd->add_option("--seed", o.seed, "Run seed");
    cmd->add_option("--workers", o.workers, "Worker threads for inference");
    cmd->add_option("--top-n", o.top_n, "Number of coarse verb candidates N");
    cmd->add_option("--support-m", o.support_m, "Support set size M");
    cmd->add_option("--alpha", o.alpha, "Weight of the coarse probability in the re-rank score");
    cmd->add_option("--beta", o.beta, "Weight of the support similarity in the re-rank score");
    cmd->add_option("--epsilon", o.epsilon, "Re-rank only when the top coarse probability is below this");
    cmd->add_option("--margin", o.margin, "Triplet margin");
    cmd->add_flag("--support-mean", o.support_mean, "Average instead of sum over the support set");
    cmd->add_flag("--no-verb-query", o.no_verb_query, "Ablation: decode without the verb query");
    cmd->add_flag("--no-shared-role-queries", o.no_shared_role_queries, "Ablation: one role query per (verb, role)");
    cmd->add_flag("--always-present", o.always_present, "Drop the presence loss; boxes always count as present");
    cmd->add_option("--null-grounding", o.null_grounding, "presence_false | exclude");
    cmd->add_option("--kernels", o.kernels, "auto | scalar | avx2");
}

pipeline::RunConfig resolve(const Overrides& o) {
    pipeline::RunConfig c = pipeline::default_config();
    fs::path cfg = o.config_path;
    if (cfg.empty() && !o.out_dir.empty() && fs::exists(pipeline::Paths(o.out_dir).config()))
        cfg = pipeline::Paths(o.out_dir).config();
    if (!cfg.empty()) c = pipeline::load_config(cfg);
    if (!o.out_dir.empty()) c.out_dir = o.out_dir;
    if (o.seed) c.seed = *o.seed;
    if (o.workers) c.workers = *o.workers;
    if (o.top_n) c.cfvm.top_n = *o.top_n;
    if (o.support_m) c.cfvm.support_m = *o.support_m;
    if (o.alpha) c.cfvm.alpha = *o.alpha;
    if (o.beta) c.cfvm.beta = *o.beta;
    if (o.epsilon) c.cfvm.epsilon = *o.epsilon;
    if (o.margin) c.cfvm.margin = *o.margin;
    if (o.support_mean) c.cfvm.support_mean = true;
    if (o.no_verb_query) c.model.use_verb_query = false;
    if (o.no_shared_role_queries) c.model.share_role_queries = false;
    if (o.always_present) c.loss.always_present = true;
    if (!o.null_grounding.empty()) c.null_grounding = metrics::parse_null_grounding(o.null_grounding);
    if (o.kernels == "scalar") num::kernels::select(num::kernels::Isa::scalar);
    else if (o.kernels == "avx2") num::kernels::select(num::kernels::Isa::avx2);
    else if (!o.kernels.empty() && o.kernels != "auto") throw ConfigError("unknown --kernels value " + o.kernels);
    pipeline::validate(c);
    return c;
}

// Persist the resolved configuration next to the command's outputs.
void record(const pipeline::RunConfig& c, const std::string& command) {
    const pipeline::Paths paths(c.out_dir);
    fs::create_directories(paths.root / "resolved");
    pipeline::save_config(paths.root / "resolved" / (command + ".json"), c);
    if (!fs::exists(paths.config())) pipeline::save_config(paths.config(), c);
}

void print_loss(const char* stage, const std::vector<double>& losses) {
    if (losses.empty()) return;
    std::printf("%s: %zu steps, first loss %.6f, final loss %.6f\n", stage, losses.size(), losses.front(), losses.back());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grounded situation recognition: synthetic data, staged training, prediction, evaluation"};
    app.require_subcommand(1);

    Overrides o;
    std::string split = "dev";
    std::vector<std::string> settings;
    bool all_settings = false;
    std::string predictions_path, gold_path, lexicon_path;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic train/dev/test splits");
    auto* train_tnm = app.add_subcommand("train-tnm", "Train the transformer noun model");
    auto* train_vc = app.add_subcommand("train-verb-c", "Train the coarse verb classifier");
    auto* gallery = app.add_subcommand("build-gallery", "Compute support features for every training image");
    auto* train_vf = app.add_subcommand("train-verb-f", "Train the fine verb head with triplets");
    auto* predict = app.add_subcommand("predict", "Write the prediction dump for a split");
    auto* eval = app.add_subcommand("eval", "Score a prediction dump");
    for (auto* cmd : {gen, train_tnm, train_vc, gallery, train_vf, predict, eval}) add_common(cmd, o);
    for (auto* cmd : {predict, eval}) cmd->add_option("--split", split, "train | dev | test");
    eval->add_option("--setting", settings, "top1 | top5 | gt_verb (repeatable)");
    eval->add_flag("--all-settings", all_settings, "Report top1, top5 and gt_verb");
    eval->add_option("--predictions", predictions_path, "Score this dump instead of the run's own");
    eval->add_option("--gold", gold_path, "Gold annotation file (with --predictions)");
    eval->add_option("--lexicon", lexicon_path, "Lexicon file (with --predictions)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (eval->parsed() && !predictions_path.empty()) {
            // Standalone harness mode: any dump against any gold file.
            if (gold_path.empty() || lexicon_path.empty())
                throw ConfigError("--predictions needs --gold and --lexicon");
            const auto c = resolve(o);
            const auto lexicon = onto::load_lexicon(lexicon_path);
            const auto dump = metrics::read_predictions(predictions_path, lexicon);
            const auto gold = onto::load_annotations(gold_path, lexicon);
            metrics::require_same_images(dump.predictions, gold);
            std::vector<metrics::MetricReport> reports;
            if (all_settings || settings.empty()) settings = {"top1", "top5", "gt_verb"};
            for (const auto& s : settings)
                reports.push_back(metrics::evaluate(dump.predictions, gold, lexicon, metrics::parse_setting(s), c.null_grounding));
            std::cout << metrics::format_table(reports);
            for (const auto& r : reports) std::cout << metrics::report_to_json(r).dump() << '\n';
            return 0;
        }

        const auto c = resolve(o);
        if (gen->parsed()) {
            record(c, "gen-data");
            pipeline::gen_data(c);
            const auto sizes = pipeline::split_sizes(c.data);
            std::printf("wrote %zu train, %zu dev, %zu test images to %s\n", sizes.train, sizes.dev, sizes.test,
                        pipeline::Paths(c.out_dir).root.c_str());
        } else if (train_tnm->parsed()) {
            record(c, "train-tnm");
            print_loss("tnm", pipeline::train_tnm_stage(c).losses);
        } else if (train_vc->parsed()) {
            record(c, "train-verb-c");
            print_loss("verb_c", pipeline::train_verb_c_stage(c).losses);
        } else if (gallery->parsed()) {
            record(c, "build-gallery");
            pipeline::build_gallery_stage(c);
            std::printf("gallery written to %s\n", pipeline::Paths(c.out_dir).gallery().c_str());
        } else if (train_vf->parsed()) {
            record(c, "train-verb-f");
            const auto log = pipeline::train_verb_f_stage(c);
            std::printf("verb_f: %zu usable anchors\n", log.usable_anchors);
            print_loss("verb_f", log.train.losses);
        } else if (predict->parsed()) {
            record(c, "predict");
            const auto dump = pipeline::predict_stage(c, split);
            std::printf("wrote %zu predictions to %s\n", dump.predictions.size(),
                        pipeline::Paths(c.out_dir).predictions(split).c_str());
        } else if (eval->parsed()) {
            record(c, "eval");
            if (all_settings || settings.empty()) settings = {"top1", "top5", "gt_verb"};
            std::vector<metrics::Setting> parsed;
            for (const auto& s : settings) parsed.push_back(metrics::parse_setting(s));
            std::cout << "split " << split << ", null grounding " << metrics::null_grounding_name(c.null_grounding) << '\n'
                      << metrics::format_table(pipeline::eval_stage(c, split, parsed));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(ErrorKind::io);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
