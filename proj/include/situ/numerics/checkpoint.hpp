#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "situ/numerics/tensor.hpp"

namespace situ::num {

inline constexpr const char* kCheckpointFormat = "situ-checkpoint-v1";

// A parameter as it appears in a checkpoint. When row_keys is set, the tensor
// is a table whose rows are stored by key (e.g. verb or role name) instead of
// by index, so reordering a vocabulary cannot misassign rows on load.
struct NamedParam {
    std::string name;
    Tensor tensor;
    std::vector<std::string> row_keys;
};

using ParamList = std::vector<NamedParam>;

std::vector<Tensor> tensors_of(const ParamList& params);

nlohmann::ordered_json params_to_json(const ParamList& params);
// Copies values from `j` into the existing tensors. Every parameter must be
// present with a matching shape (and every keyed row must be present).
void params_from_json(const nlohmann::ordered_json& j, ParamList& params);

// Content digest over names, shapes and values.
std::string params_digest(const ParamList& params);

void save_checkpoint(const std::filesystem::path& path, const ParamList& params, const nlohmann::ordered_json& meta);
// Returns the stored metadata.
nlohmann::ordered_json load_checkpoint(const std::filesystem::path& path, ParamList& params);

}  // namespace situ::num
