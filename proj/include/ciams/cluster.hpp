#pragma once

#include "ciams/common.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ciams::cluster {

enum class Method { KMeans, Agglomerative, Spectral, HDBSCAN };

inline constexpr std::array<Method, 4> kAllMethods = {Method::KMeans, Method::Agglomerative, Method::Spectral,
                                                      Method::HDBSCAN};

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

struct Assignment {
    std::vector<int> labels;  // cluster ids in [0, k)
    int k = 0;                // number of non-empty clusters (k_effective)
    Method method = Method::KMeans;
    std::vector<bool> noise_mask;  // HDBSCAN only: points labelled noise before resolution
    bool failed = false;           // solver failure; downstream emits a zero index block
    std::string failure_reason;
};

struct Options {
    int k = 2;
    double hdbscan_min_cluster_size_fraction = 0.01;
    int kmeans_restarts = 10;
    int kmeans_max_iterations = 300;
};

/// Partitions the rows of `x`. Deterministic for a fixed seed.
Assignment cluster(const Matrix& x, Method method, std::uint64_t seed, const Options& options = {});

/// Relabels ids to 0..k-1 in order of first appearance and sets k.
void compact_labels(Assignment& a);

// --- k-means -------------------------------------------------------------

struct KMeansResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;                // within-cluster sum of squares
    std::vector<double> inertia_trace;   // objective after each Lloyd assignment step (best restart)
    int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations; keeps the lowest-inertia restart.
KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10, int max_iterations = 300);

// --- Ward agglomeration --------------------------------------------------

struct Merge {
    int a = 0;  // node ids: 0..n-1 are points, n+i is the cluster created by merge i
    int b = 0;
    double height = 0.0;  // Lance-Williams Ward distance, equal to 2 x the SSE increase
    int size = 0;
};

/// Full Ward hierarchy on Euclidean distances (nearest-neighbour chain), merges sorted by height.
std::vector<Merge> ward_linkage(const Matrix& x);

/// Cuts a hierarchy into k clusters by replaying its first n-k merges.
std::vector<int> cut_hierarchy(const std::vector<Merge>& merges, int n, int k);

// --- spectral -------------------------------------------------------------

/// Symmetric-normalized spectral partition of a precomputed affinity matrix.
Assignment spectral_partition(const Matrix& affinity, int k, std::uint64_t seed);

/// RBF affinity exp(-d^2 / m), m = median pairwise squared distance; zero diagonal.
Matrix rbf_affinity(const Matrix& x);

// --- HDBSCAN --------------------------------------------------------------

/// Labels with -1 for noise. min_samples equals min_cluster_size.
std::vector<int> hdbscan(const Matrix& x, int min_cluster_size);

int hdbscan_min_cluster_size(int n, double fraction);

/// Gives each noise point the id of its nearest non-noise point.
Assignment resolve_noise(const Assignment& a, const Matrix& x);

}  // namespace ciams::cluster
