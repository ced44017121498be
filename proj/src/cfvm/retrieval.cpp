#include "situ/cfvm/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include "situ/common/error.hpp"

namespace situ::cfvm {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine: length mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double role_similarity(const std::vector<std::vector<double>>& query, const std::vector<std::vector<double>>& entry) {
    if (query.size() != entry.size()) throw PreconditionError("role_similarity: role counts differ");
    if (query.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t r = 0; r < query.size(); ++r) s += cosine(query[r], entry[r]);
    return s / static_cast<double>(query.size());
}

SupportSet retrieve_support(const std::vector<std::vector<double>>& query_roles, onto::VerbId verb,
                            const Gallery& gallery, std::size_t m, const std::string& exclude_id) {
    SupportSet out;
    out.verb = verb;
    for (std::size_t idx : gallery.of_verb(verb)) {
        const auto& e = gallery.entries[idx];
        if (!exclude_id.empty() && e.image_id == exclude_id) continue;
        out.members.push_back({idx, role_similarity(query_roles, e.role_features)});
    }
    auto before = [&](const SupportMember& a, const SupportMember& b) {
        if (a.score != b.score) return a.score > b.score;
        return gallery.entries[a.entry].image_id < gallery.entries[b.entry].image_id;
    };
    const std::size_t keep = std::min(m, out.members.size());
    std::partial_sort(out.members.begin(), out.members.begin() + static_cast<std::ptrdiff_t>(keep), out.members.end(),
                      before);
    out.members.resize(keep);
    return out;
}

std::vector<std::vector<double>> role_feature_rows(const tnm::TnmOutput& out) {
    const std::size_t d = out.role_features.cols();
    const auto f = out.role_features.values();
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < out.roles.size(); ++r) rows.emplace_back(f.begin() + r * d, f.begin() + (r + 1) * d);
    return rows;
}

SupportSet retrieve_support(const onto::Image& image, onto::VerbId verb, const Gallery& gallery,
                            const tnm::TnmModel& tnm, std::size_t m) {
    return retrieve_support(role_feature_rows(tnm.forward(image, verb)), verb, gallery, m);
}

}  // namespace situ::cfvm
