#include "situ/numerics/checkpoint.hpp"

#include <fstream>

#include "situ/common/error.hpp"
#include "situ/common/hash.hpp"

namespace situ::num {

using nlohmann::ordered_json;

std::vector<Tensor> tensors_of(const ParamList& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

ordered_json params_to_json(const ParamList& params) {
    ordered_json j = ordered_json::object();
    for (const auto& p : params) {
        ordered_json entry;
        entry["shape"] = p.tensor.shape();
        const auto v = p.tensor.values();
        if (p.row_keys.empty()) {
            entry["data"] = std::vector<double>(v.begin(), v.end());
        } else {
            const std::size_t width = p.tensor.cols();
            if (p.row_keys.size() != p.tensor.rows()) throw ShapeError("row key count mismatch for " + p.name);
            ordered_json rows = ordered_json::object();
            for (std::size_t r = 0; r < p.row_keys.size(); ++r) {
                rows[p.row_keys[r]] = std::vector<double>(v.begin() + r * width, v.begin() + (r + 1) * width);
            }
            entry["rows"] = std::move(rows);
        }
        j[p.name] = std::move(entry);
    }
    return j;
}

void params_from_json(const ordered_json& j, ParamList& params) {
    for (auto& p : params) {
        if (!j.contains(p.name)) throw SchemaError("checkpoint is missing parameter " + p.name);
        const auto& entry = j.at(p.name);
        auto dst = p.tensor.mutable_values();
        if (p.row_keys.empty()) {
            if (entry.at("shape").get<Shape>() != p.tensor.shape()) {
                throw SchemaError("shape mismatch for parameter " + p.name);
            }
            const auto data = entry.at("data").get<std::vector<double>>();
            if (data.size() != dst.size()) throw SchemaError("data length mismatch for parameter " + p.name);
            std::copy(data.begin(), data.end(), dst.begin());
        } else {
            const std::size_t width = p.tensor.cols();
            const auto& rows = entry.at("rows");
            if (rows.size() != p.row_keys.size()) throw SchemaError("row count mismatch for parameter " + p.name);
            for (std::size_t r = 0; r < p.row_keys.size(); ++r) {
                if (!rows.contains(p.row_keys[r])) {
                    throw SchemaError("checkpoint table " + p.name + " has no row '" + p.row_keys[r] + "'");
                }
                const auto row = rows.at(p.row_keys[r]).get<std::vector<double>>();
                if (row.size() != width) throw SchemaError("row width mismatch in " + p.name);
                std::copy(row.begin(), row.end(), dst.begin() + r * width);
            }
        }
        require_finite(dst, "checkpoint load");
    }
}

std::string params_digest(const ParamList& params) {
    std::uint64_t h = fnv1a("");
    for (const auto& p : params) {
        h = fnv1a(p.name, h);
        for (auto d : p.tensor.shape()) h = fnv1a(std::to_string(d), h);
        const auto v = p.tensor.values();
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)), h);
    }
    return hex_digest(h);
}

void save_checkpoint(const std::filesystem::path& path, const ParamList& params, const ordered_json& meta) {
    ordered_json j;
    j["format"] = kCheckpointFormat;
    j["meta"] = meta;
    j["digest"] = params_digest(params);
    j["params"] = params_to_json(params);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << j.dump(1) << '\n';
}

ordered_json load_checkpoint(const std::filesystem::path& path, ParamList& params) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat) throw SchemaError("unknown checkpoint format in " + path.string());
    params_from_json(j.at("params"), params);
    return j.value("meta", ordered_json::object());
}

}  // namespace situ::num
