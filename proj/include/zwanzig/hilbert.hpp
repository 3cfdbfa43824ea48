#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "zwanzig/errors.hpp"
#include "zwanzig/policy.hpp"

namespace zwanzig {

struct Factor {
    std::string label;
    int dim = 0;

    bool operator==(const Factor&) const = default;
};

// Ordered list of labelled tensor factors. Flat indices run with factor 0 most
// significant, i.e. |i0 i1 ... ik> maps to ((i0 * d1 + i1) * d2 + i2) ... , the
// same convention as a chained Kronecker product.
class HilbertSpace {
public:
    HilbertSpace() = default;

    explicit HilbertSpace(std::vector<Factor> factors,
                          const NumericalPolicy& policy = default_policy())
        : factors_(std::move(factors)) {
        if (factors_.empty()) throw InvalidArgument("HilbertSpace: no factors");
        std::unordered_set<std::string> seen;
        long long total = 1;
        for (const auto& f : factors_) {
            if (f.dim < 1) throw InvalidArgument("HilbertSpace: factor '" + f.label + "' has dim < 1");
            if (!seen.insert(f.label).second)
                throw InvalidArgument("HilbertSpace: duplicate factor label '" + f.label + "'");
            total *= f.dim;
            if (total > policy.max_total_dim)
                throw DimensionError("HilbertSpace: total dimension " + std::to_string(total) +
                                     " exceeds cap " + std::to_string(policy.max_total_dim));
        }
        total_dim_ = static_cast<int>(total);
    }

    static HilbertSpace single(std::string label, int dim,
                               const NumericalPolicy& policy = default_policy()) {
        return HilbertSpace({{std::move(label), dim}}, policy);
    }

    int total_dim() const { return total_dim_; }
    const std::vector<Factor>& factors() const { return factors_; }
    std::size_t factor_count() const { return factors_.size(); }

    bool has_factor(std::string_view label) const {
        return std::any_of(factors_.begin(), factors_.end(),
                           [&](const Factor& f) { return f.label == label; });
    }

    std::size_t factor_index(std::string_view label) const {
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].label == label) return i;
        throw InvalidArgument("HilbertSpace: unknown factor label '" + std::string(label) + "'");
    }

    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        out.reserve(factors_.size());
        for (const auto& f : factors_) out.push_back(f.label);
        return out;
    }

    // Subspace holding the selected factors, kept in their original order.
    HilbertSpace subspace(const std::vector<std::string>& selected) const {
        std::vector<Factor> kept;
        for (const auto& f : factors_)
            if (std::find(selected.begin(), selected.end(), f.label) != selected.end())
                kept.push_back(f);
        if (kept.size() != selected.size())
            throw InvalidArgument("HilbertSpace::subspace: selection contains unknown or repeated labels");
        return HilbertSpace(std::move(kept));
    }

    bool operator==(const HilbertSpace& other) const { return factors_ == other.factors_; }
    bool operator!=(const HilbertSpace& other) const { return !(*this == other); }

private:
    std::vector<Factor> factors_;
    int total_dim_ = 0;
};

// Decomposition of every flat index into a (selected, rest) pair, where the
// selected factors keep their original relative order and likewise the rest.
// This single map drives partial traces, factor regrouping and Schmidt splits.
struct IndexSplit {
    int selected_dim = 1;
    int rest_dim = 1;
    std::vector<int> selected_of; // flat index -> selected component
    std::vector<int> rest_of;     // flat index -> rest component
};

inline IndexSplit split_indices(const HilbertSpace& space,
                                const std::vector<std::string>& selected) {
    const auto& factors = space.factors();
    std::vector<bool> is_selected(factors.size(), false);
    for (const auto& label : selected) {
        std::size_t k = space.factor_index(label);
        if (is_selected[k]) throw InvalidArgument("split_indices: repeated label '" + label + "'");
        is_selected[k] = true;
    }

    IndexSplit split;
    for (std::size_t k = 0; k < factors.size(); ++k)
        (is_selected[k] ? split.selected_dim : split.rest_dim) *= factors[k].dim;

    const int d = space.total_dim();
    split.selected_of.resize(d);
    split.rest_of.resize(d);
    for (int flat = 0; flat < d; ++flat) {
        int rem = flat, sel = 0, rest = 0;
        // Walk factors most-significant first, peeling digits off `flat`.
        int radix = d;
        for (std::size_t k = 0; k < factors.size(); ++k) {
            radix /= factors[k].dim;
            const int digit = rem / radix;
            rem %= radix;
            if (is_selected[k]) sel = sel * factors[k].dim + digit;
            else rest = rest * factors[k].dim + digit;
        }
        split.selected_of[flat] = sel;
        split.rest_of[flat] = rest;
    }
    return split;
}

// Permutation regrouping the selected factors in front: new_flat = sel * rest_dim + rest.
// Returns old_of_new: the old flat index contributing to each regrouped index.
inline std::vector<int> regroup_permutation(const IndexSplit& split) {
    std::vector<int> old_of_new(split.selected_of.size());
    for (std::size_t flat = 0; flat < split.selected_of.size(); ++flat) {
        const int pos = split.selected_of[flat] * split.rest_dim + split.rest_of[flat];
        old_of_new[static_cast<std::size_t>(pos)] = static_cast<int>(flat);
    }
    return old_of_new;
}

} // namespace zwanzig
