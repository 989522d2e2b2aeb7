#pragma once
#include "mct/errors.hpp"
#include "mct/expfam.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mct {

struct Group
{
    std::string id;
    Sample sample;

    friend bool operator==(const Group&, const Group&) = default;
};

/// J groups of observations from one family, with optional ground-truth
/// cluster labels (one per group).
struct GroupedDataset
{
    FamilySpec spec;
    std::vector<Group> groups;
    std::optional<std::vector<int>> labels;
    std::map<std::string, std::string> meta;

    std::size_t size() const { return groups.size(); }

    /// Throws DataError when a group is empty, a point does not conform to the
    /// family, or the label count differs from the group count.
    void validate() const
    {
        spec.validate();
        if (groups.empty()) throw DataError("dataset has no groups");
        for (const auto& g : groups) {
            if (g.sample.size() == 0) throw DataError("group '" + g.id + "' has no observations");
            if (spec.is_categorical()) {
                if (!g.sample.is_discrete()) throw DataError("group '" + g.id + "' is not categorical");
                for (int c : g.sample.categories)
                    if (c < 0 || c >= spec.dim)
                        throw DataError("group '" + g.id + "' has category " + std::to_string(c) + " outside [0, "
                                        + std::to_string(spec.dim) + ")");
            } else {
                if (g.sample.is_discrete() || g.sample.points.cols() != spec.dim)
                    throw DataError("group '" + g.id + "' points do not have dimension " + std::to_string(spec.dim));
                if (!g.sample.points.allFinite()) throw DataError("group '" + g.id + "' has non-finite points");
            }
        }
        if (labels && labels->size() != groups.size())
            throw DataError("dataset has " + std::to_string(labels->size()) + " labels for "
                            + std::to_string(groups.size()) + " groups");
    }

    friend bool operator==(const GroupedDataset& a, const GroupedDataset& b)
    {
        return a.spec == b.spec && a.groups == b.groups && a.labels == b.labels && a.meta == b.meta;
    }
};

} // namespace mct
