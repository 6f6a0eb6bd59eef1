#pragma once

#include "ciams/cluster.hpp"
#include "ciams/common.hpp"
#include "ciams/data.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ciams::indices {

inline constexpr int kInternalCount = 17;
inline constexpr int kExternalCount = 23;
inline constexpr int kPerMethod = kInternalCount + kExternalCount;

/// Index names in feature order: internal block, then external block.
const std::array<std::string, kInternalCount>& internal_names();
const std::array<std::string, kExternalCount>& external_names();

using InternalValues = std::array<double, kInternalCount>;
using ExternalValues = std::array<double, kExternalCount>;

/// Feature order of an IndexVector: `Method:Index` for each active method.
struct Schema {
    std::vector<cluster::Method> methods;

    static Schema all() { return Schema{{cluster::kAllMethods.begin(), cluster::kAllMethods.end()}}; }
    [[nodiscard]] std::vector<std::string> names() const;
    [[nodiscard]] std::size_t size() const { return methods.size() * kPerMethod; }
};

/// Recovers the method set from feature names; throws ValidationError on malformed input.
Schema schema_from_names(const std::vector<std::string>& names);

struct IndexVector {
    std::vector<double> values;
    std::vector<std::string> schema;
    std::string subsample_ref;
};

struct PairCounts {
    // Reference partition is the class labeling: "y" = same class / same cluster.
    double yy = 0;  // same class, same cluster
    double yn = 0;  // same class, different cluster
    double ny = 0;  // different class, same cluster
    double nn = 0;  // different class, different cluster
    [[nodiscard]] double total() const { return yy + yn + ny + nn; }
};

struct ContingencyTable {
    std::vector<std::array<long long, 2>> counts;  // cluster x {negative, positive}
    PairCounts pairs;
};

ContingencyTable contingency(const Labels& classes, const std::vector<int>& clusters);

/// NaN -> 0, +inf -> 1e6, -inf -> -1e6.
double sanitize(double x);

/// Pairwise Euclidean distances.
Matrix distance_matrix(const Matrix& x);

/// Raw (unsanitized) internal indices; NaN where undefined.
InternalValues internal_indices(const Matrix& x, const cluster::Assignment& a);
InternalValues internal_indices(const Matrix& x, const cluster::Assignment& a, const Matrix& distances);

/// Raw (unsanitized) external indices of the clustering against the class labels.
ExternalValues external_indices(const Labels& classes, const cluster::Assignment& a);

struct VectorOptions {
    cluster::Options clustering;
};

/// Clusters the subsample with each method and concatenates sanitized index blocks.
IndexVector index_vector(const data::Subsample& s, const std::vector<cluster::Method>& methods, std::uint64_t seed,
                         const VectorOptions& options = {});
IndexVector index_vector(const Matrix& features, const Labels& labels, const std::vector<cluster::Method>& methods,
                         std::uint64_t seed, const VectorOptions& options = {});

}  // namespace ciams::indices
