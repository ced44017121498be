#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "situ/cfvm/fine_head.hpp"
#include "situ/metrics/metrics.hpp"
#include "situ/numerics/trainer.hpp"
#include "situ/ontology/synth.hpp"
#include "situ/tnm/loss.hpp"

namespace situ::pipeline {

struct DataConfig {
    onto::SynthSpec synth;
    std::size_t count = 480;
    std::array<double, 3> splits{0.75, 0.125, 0.125};  // train, dev, test
    // Hard-image fraction used when rendering dev and test (synth.hard_fraction
    // applies to train).
    double eval_hard_fraction = 0.0;
};

struct ModelConfig {
    std::size_t patch = 4;
    std::size_t model_dim = 32;
    std::size_t num_heads = 4;
    std::size_t ff_dim = 64;
    std::size_t tnm_encoder_layers = 1;
    std::size_t tnm_decoder_layers = 2;
    std::size_t verb_c_encoder_layers = 2;
    std::size_t max_roles = onto::kDefaultMaxRoles;
    bool use_verb_query = true;
    bool share_role_queries = true;
    bool tnm_position = true;
    bool verb_c_position = true;
};

struct StageOptions {
    std::size_t steps = 1000;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    double weight_decay = 1e-4;
    std::size_t lr_drop_step = 0;
    double lr_drop_factor = 0.1;
    double clip_norm = 0.0;
};

struct RunConfig {
    std::uint64_t seed = 7;
    DataConfig data;
    ModelConfig model;
    tnm::LossWeights loss;
    StageOptions train_tnm;
    StageOptions train_verb_c;
    StageOptions train_verb_f;
    cfvm::FineHeadConfig cfvm;
    metrics::NullGrounding null_grounding = metrics::NullGrounding::presence_false;
    std::size_t workers = 1;
    std::string out_dir = "run";
};

RunConfig default_config();
nlohmann::ordered_json config_to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are a ConfigError.
RunConfig config_from_json(const nlohmann::ordered_json& j);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& config);
// Throws ConfigError on invalid values.
void validate(const RunConfig& config);

// Hash of everything that determines trained weights (seed, data, model,
// loss, training schedules). Inference-time CFVM parameters, worker count and
// output directory are excluded so they can be changed per invocation.
std::string config_hash(const RunConfig& config);

num::TrainOptions train_options(const StageOptions& stage, std::uint64_t seed);

}  // namespace situ::pipeline
