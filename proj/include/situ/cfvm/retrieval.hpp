#pragma once

#include <span>
#include <string>
#include <vector>

#include "situ/cfvm/gallery.hpp"

namespace situ::cfvm {

// Plain-double cosine; 0 when either vector is all zeros.
double cosine(std::span<const double> a, std::span<const double> b);

// Mean over roles of the cosine between matching role features.
double role_similarity(const std::vector<std::vector<double>>& query, const std::vector<std::vector<double>>& entry);

struct SupportMember {
    std::size_t entry = 0;  // index into Gallery::entries
    double score = 0.0;     // S(I, I_k)
};

struct SupportSet {
    onto::VerbId verb = 0;
    std::vector<SupportMember> members;  // S descending, ties by ascending image id
};

// Top-M entries of D_verb by role similarity to `query_roles` (the query's TNM
// role features under `verb`). An entry whose image id equals `exclude_id` is
// skipped. A verb with no gallery entries yields an empty set.
SupportSet retrieve_support(const std::vector<std::vector<double>>& query_roles, onto::VerbId verb,
                            const Gallery& gallery, std::size_t m, const std::string& exclude_id = {});

std::vector<std::vector<double>> role_feature_rows(const tnm::TnmOutput& out);

// Runs the TNM on the image conditioned on `verb`, then retrieves.
SupportSet retrieve_support(const onto::Image& image, onto::VerbId verb, const Gallery& gallery,
                            const tnm::TnmModel& tnm, std::size_t m);

}  // namespace situ::cfvm
