#include "ciams/indices.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ciams;

namespace {

cluster::Assignment assign(std::vector<int> labels) {
    cluster::Assignment a;
    a.labels = std::move(labels);
    cluster::compact_labels(a);
    return a;
}

int internal_pos(const std::string& name) {
    const auto& n = indices::internal_names();
    return static_cast<int>(std::find(n.begin(), n.end(), name) - n.begin());
}

int external_pos(const std::string& name) {
    const auto& n = indices::external_names();
    return static_cast<int>(std::find(n.begin(), n.end(), name) - n.begin());
}

std::vector<std::pair<int, double>> pair_expectations(const oracle::PairIndices& o) {
    return {{external_pos("Recall"), o.recall},
            {external_pos("Folkes-Mallows"), o.fowlkes},
            {external_pos("Rogers-Tanimoto"), o.rogers},
            {external_pos("F1"), o.f1},
            {external_pos("Kulczynski"), o.kulczynski},
            {external_pos("Sokal-Sneath-1"), o.sokal1},
            {external_pos("Rand"), o.rand},
            {external_pos("Hubert-Gamma"), o.hubert},
            {external_pos("Jaccard"), o.jaccard},
            {external_pos("Adj-Rand"), o.ari},
            {external_pos("Phi"), o.phi},
            {external_pos("McNemar"), o.mcnemar},
            {external_pos("Russel-Rao"), o.russel},
            {external_pos("Precision"), o.precision},
            {external_pos("Weighted-F1"), o.weighted_f1},
            {external_pos("Sokal-Sneath-2"), o.sokal2}};
}

}  // namespace

TEST_CASE("names and schema") {
    CHECK(indices::internal_names().size() == 17);
    CHECK(indices::external_names().size() == 23);
    const auto names = indices::Schema::all().names();
    CHECK(names.size() == 160);
    CHECK(names.front() == "KMeans:Between-Cluster-Scatter");
    CHECK(indices::schema_from_names(names).methods == indices::Schema::all().methods);
    auto bad = names;
    bad.pop_back();
    CHECK_THROWS_AS(indices::schema_from_names(bad), ValidationError);
    auto renamed = names;
    renamed[5] = "KMeans:Bogus";
    CHECK_THROWS_AS(indices::schema_from_names(renamed), ValidationError);
}

TEST_CASE("sanitize") {
    CHECK(indices::sanitize(std::nan("")) == 0.0);
    CHECK(indices::sanitize(INFINITY) == 1e6);
    CHECK(indices::sanitize(-INFINITY) == -1e6);
    CHECK(indices::sanitize(0.25) == 0.25);
}

TEST_CASE("dunn and silhouette on two tight 1-D clusters") {
    Matrix x(4, 1);
    x << 0, 1, 10, 11;
    const auto v = indices::internal_indices(x, assign({0, 0, 1, 1}));
    CHECK(v[static_cast<std::size_t>(internal_pos("Dunn"))] == doctest::Approx(9.0));
    // per point: 1 - 1/10.5 and 1 - 1/9.5, each twice
    const double sil = (2 * (1 - 1 / 10.5) + 2 * (1 - 1 / 9.5)) / 4;
    CHECK(v[static_cast<std::size_t>(internal_pos("Silhouette"))] == doctest::Approx(sil).epsilon(1e-12));
    CHECK(sil == doctest::Approx(0.8997).epsilon(1e-3));
    // W = 4 * 0.25 = 1, B = 4 * 25 = 100
    CHECK(v[static_cast<std::size_t>(internal_pos("Within-Cluster-Scatter"))] == doctest::Approx(1.0));
    CHECK(v[static_cast<std::size_t>(internal_pos("Between-Cluster-Scatter"))] == doctest::Approx(100.0));
    CHECK(v[static_cast<std::size_t>(internal_pos("Calinski-Harabasz"))] == doctest::Approx(200.0));
    CHECK(v[static_cast<std::size_t>(internal_pos("C-Index"))] == doctest::Approx(0.0));
}

TEST_CASE("rand on crossed partitions") {
    const auto v = indices::external_indices({1, 1, -1, -1}, assign({0, 1, 0, 1}));
    CHECK(v[static_cast<std::size_t>(external_pos("Rand"))] == doctest::Approx(1.0 / 3.0));
    CHECK(v[static_cast<std::size_t>(external_pos("Purity"))] == doctest::Approx(0.5));
    CHECK(v[static_cast<std::size_t>(external_pos("Entropy"))] == doctest::Approx(std::log(2.0)));
    CHECK(v[static_cast<std::size_t>(external_pos("Adj-Rand"))] == doctest::Approx(-0.5));
}

TEST_CASE("entropic indices when the clustering refines the classes") {
    const auto v = indices::external_indices({1, 1, -1, -1}, assign({0, 0, 1, 2}));
    CHECK(v[static_cast<std::size_t>(external_pos("Homogeneity"))] == doctest::Approx(1.0));
    CHECK(v[static_cast<std::size_t>(external_pos("Completeness"))] ==
          doctest::Approx(std::log(2.0) / (1.5 * std::log(2.0))));
    CHECK(v[static_cast<std::size_t>(external_pos("V-Measure"))] == doctest::Approx(0.8));
    CHECK(v[static_cast<std::size_t>(external_pos("Norm-Mutual-Info"))] == doctest::Approx(0.8));
    CHECK(v[static_cast<std::size_t>(external_pos("Entropy"))] == doctest::Approx(0.0));
    CHECK(v[static_cast<std::size_t>(external_pos("Purity"))] == doctest::Approx(1.0));

    const auto perfect = indices::external_indices({1, 1, -1, -1, -1}, assign({1, 1, 0, 0, 0}));
    CHECK(perfect[static_cast<std::size_t>(external_pos("Adj-Mutual-Info"))] == doctest::Approx(1.0));
    CHECK(perfect[static_cast<std::size_t>(external_pos("Adj-Rand"))] == doctest::Approx(1.0));
}

TEST_CASE("pair-counting indices agree with the pair-loop oracle") {
    for (int n = 2; n <= 7; ++n) {
        oracle::for_each_partition(n, 3, [&](const std::vector<int>& clusters) {
            for (int mask = 1; mask < (1 << n) - 1; ++mask) {
                Labels classes(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i) classes[static_cast<std::size_t>(i)] = (mask >> i) & 1 ? 1 : -1;
                const auto v = indices::external_indices(classes, assign(clusters));
                const auto o = oracle::pair_indices(oracle::pair_loop(classes, clusters));
                for (const auto& [pos, want] : pair_expectations(o)) {
                    const double got = indices::sanitize(v[static_cast<std::size_t>(pos)]);
                    if (!oracle::close(got, indices::sanitize(want), 1e-9)) {
                        FAIL_CHECK(indices::external_names()[static_cast<std::size_t>(pos)] << " n=" << n
                                                                                              << " mask=" << mask);
                    }
                }
            }
        });
    }
}

TEST_CASE("partition enumeration counts") {
    // Stirling numbers: S(5,1)+S(5,2)+S(5,3) = 1 + 15 + 25
    int count = 0;
    oracle::for_each_partition(5, 3, [&](const std::vector<int>&) { ++count; });
    CHECK(count == 41);
    count = 0;
    oracle::for_each_partition(10, 3, [&](const std::vector<int>&) { ++count; });
    CHECK(count == 1 + 511 + 9330);
}

TEST_CASE("internal indices against naive formulas") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const int n = 30, p = 3, k = 3;
    Matrix x(n, p);
    std::vector<int> lab(n);
    for (int i = 0; i < n; ++i) {
        lab[static_cast<std::size_t>(i)] = i % k;
        for (int j = 0; j < p; ++j) x(i, j) = g(rng) + 3.0 * (i % k) * (j == 0);
    }
    const auto v = indices::internal_indices(x, assign(lab));

    std::vector<Eigen::RowVectorXd> cent(k, Eigen::RowVectorXd::Zero(p));
    std::vector<int> sz(k, 0);
    for (int i = 0; i < n; ++i) {
        cent[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])] += x.row(i);
        ++sz[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) cent[static_cast<std::size_t>(c)] /= sz[static_cast<std::size_t>(c)];
    const Eigen::RowVectorXd mu = x.colwise().mean();
    double w = 0, b = 0;
    std::vector<double> wc(k, 0), spread(k, 0);
    for (int i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(lab[static_cast<std::size_t>(i)]);
        wc[c] += (x.row(i) - cent[c]).squaredNorm();
        spread[c] += (x.row(i) - cent[c]).norm() / sz[c];
    }
    for (int c = 0; c < k; ++c) {
        w += wc[static_cast<std::size_t>(c)];
        b += sz[static_cast<std::size_t>(c)] * (cent[static_cast<std::size_t>(c)] - mu).squaredNorm();
    }
    CHECK(v[static_cast<std::size_t>(internal_pos("Calinski-Harabasz"))] ==
          doctest::Approx((b / (k - 1)) / (w / (n - k))).epsilon(1e-10));
    double bh = 0;
    for (int c = 0; c < k; ++c) bh += wc[static_cast<std::size_t>(c)] / sz[static_cast<std::size_t>(c)];
    CHECK(v[static_cast<std::size_t>(internal_pos("Ball-Hall"))] == doctest::Approx(bh / k).epsilon(1e-10));
    CHECK(v[static_cast<std::size_t>(internal_pos("Log-SS-Ratio"))] == doctest::Approx(std::log(b / w)).epsilon(1e-10));
    double db = 0;
    for (int c = 0; c < k; ++c) {
        double worst = 0;
        for (int o = 0; o < k; ++o)
            if (o != c)
                worst = std::max(worst, (spread[static_cast<std::size_t>(c)] + spread[static_cast<std::size_t>(o)]) /
                                            (cent[static_cast<std::size_t>(c)] - cent[static_cast<std::size_t>(o)]).norm());
        db += worst;
    }
    CHECK(v[static_cast<std::size_t>(internal_pos("Davies-Bouldin"))] == doctest::Approx(db / k).epsilon(1e-10));

    // Silhouette from the definition, averaged per cluster then over clusters.
    const Matrix d = indices::distance_matrix(x);
    std::vector<double> per(k, 0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0);
        for (int j = 0; j < n; ++j) sum[static_cast<std::size_t>(lab[static_cast<std::size_t>(j)])] += d(i, j);
        const auto own = static_cast<std::size_t>(lab[static_cast<std::size_t>(i)]);
        const double ai = sum[own] / (sz[own] - 1);
        double bi = INFINITY;
        for (int c = 0; c < k; ++c)
            if (static_cast<std::size_t>(c) != own) bi = std::min(bi, sum[static_cast<std::size_t>(c)] / sz[static_cast<std::size_t>(c)]);
        per[own] += (bi - ai) / std::max(ai, bi) / sz[own];
    }
    CHECK(v[static_cast<std::size_t>(internal_pos("Silhouette"))] ==
          doctest::Approx((per[0] + per[1] + per[2]) / k).epsilon(1e-10));
}

TEST_CASE("index vector shape and determinism") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    Matrix x(60, 4);
    Labels y(60);
    for (int i = 0; i < 60; ++i) {
        y[static_cast<std::size_t>(i)] = i < 20 ? 1 : -1;
        for (int j = 0; j < 4; ++j) x(i, j) = g(rng) + (i < 20 ? 2.0 : 0.0);
    }
    const auto methods = indices::Schema::all().methods;
    const auto a = indices::index_vector(x, y, methods, 7);
    const auto b = indices::index_vector(x, y, methods, 7);
    CHECK(a.values.size() == 160);
    CHECK(a.values == b.values);
    for (double v : a.values) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(indices::index_vector(x, y, {}, 7), ValidationError);
}
