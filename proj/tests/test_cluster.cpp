#include "ciams/cluster.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace ciams;
using namespace ciams::cluster;

namespace {

Matrix blobs(const std::vector<Eigen::RowVector2d>& centers, int per, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Matrix x(static_cast<Eigen::Index>(centers.size()) * per, 2);
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (int i = 0; i < per; ++i) {
            const auto r = static_cast<Eigen::Index>(c) * per + i;
            x(r, 0) = centers[c](0) + g(rng);
            x(r, 1) = centers[c](1) + g(rng);
        }
    return x;
}

// True when two labelings induce the same partition.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j)
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    return true;
}

std::vector<int> block_truth(int blocks, int per) {
    std::vector<int> t;
    for (int c = 0; c < blocks; ++c) t.insert(t.end(), static_cast<std::size_t>(per), c);
    return t;
}

struct GreedyWard {
    std::vector<double> heights;
    std::vector<std::vector<int>> cuts;  // labels after each merge
};

// O(n^3) agglomeration merging the pair with the smallest increase in within-cluster sum of squares.
GreedyWard greedy_ward(const Matrix& x) {
    const int n = static_cast<int>(x.rows());
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};
    auto centroid = [&](const std::vector<int>& m) {
        Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(x.cols());
        for (int i : m) c += x.row(i);
        return Eigen::RowVectorXd(c / static_cast<double>(m.size()));
    };
    GreedyWard out;
    while (members.size() > 1) {
        double best = INFINITY;
        std::size_t ba = 0, bb = 0;
        for (std::size_t a = 0; a < members.size(); ++a)
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const double na = static_cast<double>(members[a].size());
                const double nb = static_cast<double>(members[b].size());
                const double delta = na * nb / (na + nb) * (centroid(members[a]) - centroid(members[b])).squaredNorm();
                if (delta < best) {
                    best = delta;
                    ba = a;
                    bb = b;
                }
            }
        members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(bb));
        out.heights.push_back(2.0 * best);
        std::vector<int> lab(static_cast<std::size_t>(n));
        for (std::size_t c = 0; c < members.size(); ++c)
            for (int i : members[c]) lab[static_cast<std::size_t>(i)] = static_cast<int>(c);
        out.cuts.push_back(lab);
    }
    return out;
}

}  // namespace

TEST_CASE("method names round trip") {
    for (Method m : kAllMethods) CHECK(parse_method(method_name(m)) == m);
    CHECK_FALSE(parse_method("nope").has_value());
}

TEST_CASE("k-means recovers separated blobs with a non-increasing objective") {
    const Matrix x = blobs({{0, 0}, {10, 0}, {0, 10}}, 20, 0.5, 1);
    const auto r = kmeans(x, 3, 4);
    CHECK(same_partition(r.labels, block_truth(3, 20)));
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
    double sse = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) sse += (x.row(i) - r.centers.row(r.labels[static_cast<std::size_t>(i)])).squaredNorm();
    CHECK(r.inertia == doctest::Approx(sse));
    CHECK(kmeans(x, 3, 4).labels == r.labels);
}

TEST_CASE("ward linkage matches greedy agglomeration") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Matrix x(25, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    const auto merges = ward_linkage(x);
    const auto oracle = greedy_ward(x);
    REQUIRE(merges.size() == 24);
    for (std::size_t i = 0; i < merges.size(); ++i) CHECK(merges[i].height == doctest::Approx(oracle.heights[i]).epsilon(1e-9));
    for (int k = 1; k <= 6; ++k) CHECK(same_partition(cut_hierarchy(merges, 25, k), oracle.cuts[static_cast<std::size_t>(25 - k - 1)]));
    CHECK(merges.back().size == 25);
}

TEST_CASE("rbf affinity uses the median squared distance") {
    Matrix x(3, 1);
    x << 0, 1, 3;  // squared distances 1, 9, 4; median 4
    const Matrix w = rbf_affinity(x);
    CHECK(w(0, 0) == 0.0);
    CHECK(w(0, 1) == doctest::Approx(std::exp(-0.25)));
    CHECK(w(0, 2) == doctest::Approx(std::exp(-9.0 / 4)));
    CHECK(w(1, 2) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("spectral clustering separates two blobs") {
    const Matrix x = blobs({{0, 0}, {8, 8}}, 25, 0.5, 2);
    const auto a = cluster::cluster(x, Method::Spectral, 3);
    CHECK(a.k == 2);
    CHECK(same_partition(a.labels, block_truth(2, 25)));
}

TEST_CASE("hdbscan finds dense groups and resolves noise") {
    Matrix x = blobs({{0, 0}, {20, 0}}, 30, 0.5, 5);
    x.conservativeResize(61, 2);
    x.row(60) << 10, 40;
    const auto raw = hdbscan(x, 5);
    CHECK(raw[60] == -1);
    std::set<int> ids(raw.begin(), raw.begin() + 60);
    ids.erase(-1);
    CHECK(ids.size() == 2);
    const auto a = cluster::cluster(x, Method::HDBSCAN, 0);
    CHECK(a.noise_mask[60]);
    std::vector<int> first(a.labels.begin(), a.labels.begin() + 60);
    CHECK(same_partition(first, block_truth(2, 30)));
    for (int l : a.labels) CHECK(l >= 0);
    CHECK(hdbscan_min_cluster_size(100, 0.01) == 5);
    CHECK(hdbscan_min_cluster_size(1000, 0.01) == 10);
}

TEST_CASE("degenerate inputs") {
    Matrix same = Matrix::Ones(6, 2);
    for (Method m : kAllMethods) {
        const auto a = cluster::cluster(same, m, 1);
        CHECK(a.k == 1);
    }
    Matrix tiny(1, 2);
    tiny << 1, 2;
    CHECK_THROWS_AS(cluster::cluster(tiny, Method::KMeans, 1), ValidationError);
    Matrix bad = Matrix::Zero(4, 1);
    bad(0, 0) = NAN;
    CHECK_THROWS_AS(cluster::cluster(bad, Method::KMeans, 1), ValidationError);
}

TEST_CASE("clustering is deterministic for a fixed seed") {
    const Matrix x = blobs({{0, 0}, {3, 0}, {0, 3}}, 15, 1.0, 9);
    for (Method m : kAllMethods) CHECK(cluster::cluster(x, m, 11).labels == cluster::cluster(x, m, 11).labels);
}
