#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/metrics/metrics.hpp"

namespace situ::metrics {

inline constexpr const char* kPredictionFormat = "situ-predictions-v1";

struct PredictionDump {
    std::string config_hash;
    std::vector<Prediction> predictions;
};

// Layout in docs/FORMAT.md. Loading validates verb/role/noun names against the
// lexicon, ranked verbs for duplicates, and role lists against each verb.
nlohmann::ordered_json predictions_to_json(const PredictionDump& dump, const onto::Lexicon& lexicon);
PredictionDump predictions_from_json(const nlohmann::ordered_json& j, const onto::Lexicon& lexicon);
void write_predictions(const std::filesystem::path& path, const PredictionDump& dump, const onto::Lexicon& lexicon);
PredictionDump read_predictions(const std::filesystem::path& path, const onto::Lexicon& lexicon);

// SchemaError unless the dump and the gold set cover the same image ids.
void require_same_images(const std::vector<Prediction>& predictions, const onto::AnnotationSet& gold);

}  // namespace situ::metrics
