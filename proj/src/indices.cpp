#include "ciams/indices.hpp"

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ciams::indices {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const std::array<std::string, kInternalCount>& internal_names() {
    static const std::array<std::string, kInternalCount> names = {
        "Between-Cluster-Scatter", "Banfeld-Raftery", "Ball-Hall",         "PBM",        "Det-Ratio",
        "Log-Det-Ratio",           "Ksq-DetW",        "Score",             "Silhouette", "Log-SS-Ratio",
        "C-Index",                 "Dunn",            "Ray-Turi",          "Calinski-Harabasz",
        "Trace-WiB",               "Davies-Bouldin",  "Within-Cluster-Scatter"};
    return names;
}

const std::array<std::string, kExternalCount>& external_names() {
    static const std::array<std::string, kExternalCount> names = {
        "Entropy",     "Purity",      "Recall",       "Folkes-Mallows", "Rogers-Tanimoto", "F1",
        "Kulczynski",  "Norm-Mutual-Info", "Sokal-Sneath-1", "Rand",     "Hubert-Gamma",    "Homogeneity",
        "Completeness", "V-Measure",  "Jaccard",      "Adj-Rand",       "Phi",             "McNemar",
        "Russel-Rao",  "Precision",   "Weighted-F1",  "Sokal-Sneath-2", "Adj-Mutual-Info"};
    return names;
}

std::vector<std::string> Schema::names() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (cluster::Method m : methods) {
        const std::string prefix = cluster::method_name(m) + ":";
        for (const auto& n : internal_names()) out.push_back(prefix + n);
        for (const auto& n : external_names()) out.push_back(prefix + n);
    }
    return out;
}

Schema schema_from_names(const std::vector<std::string>& names) {
    if (names.empty() || names.size() % kPerMethod != 0)
        throw ValidationError("schema mismatch: feature count " + std::to_string(names.size()) +
                              " is not a multiple of " + std::to_string(kPerMethod));
    Schema s;
    for (std::size_t block = 0; block < names.size() / kPerMethod; ++block) {
        const std::string& first = names[block * kPerMethod];
        auto m = cluster::parse_method(first.substr(0, first.find(':')));
        if (!m) throw ValidationError("schema mismatch: unknown clustering method in '" + first + "'");
        s.methods.push_back(*m);
    }
    if (s.names() != names) throw ValidationError("schema mismatch: unexpected feature names");
    return s;
}

double sanitize(double x) {
    if (std::isnan(x)) return 0.0;
    if (std::isinf(x)) return x > 0 ? 1e6 : -1e6;
    return x;
}

Matrix distance_matrix(const Matrix& x) {
    const auto n = x.rows();
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (x.row(i) - x.row(j)).norm();
    }
    return d;
}

ContingencyTable contingency(const Labels& classes, const std::vector<int>& clusters) {
    if (classes.size() != clusters.size()) throw ValidationError("label and assignment lengths differ");
    ContingencyTable t;
    int k = 0;
    for (int c : clusters) k = std::max(k, c + 1);
    t.counts.assign(static_cast<std::size_t>(k), {0, 0});
    for (std::size_t i = 0; i < classes.size(); ++i) ++t.counts[static_cast<std::size_t>(clusters[i])][classes[i] > 0 ? 1 : 0];

    auto pairs = [](long long m) { return static_cast<double>(m) * static_cast<double>(m - 1) / 2.0; };
    const auto n = static_cast<long long>(classes.size());
    double same_both = 0.0;
    double same_cluster = 0.0;
    std::array<long long, 2> class_sizes{0, 0};
    for (const auto& row : t.counts) {
        same_both += pairs(row[0]) + pairs(row[1]);
        same_cluster += pairs(row[0] + row[1]);
        class_sizes[0] += row[0];
        class_sizes[1] += row[1];
    }
    const double same_class = pairs(class_sizes[0]) + pairs(class_sizes[1]);
    t.pairs.yy = same_both;
    t.pairs.yn = same_class - same_both;
    t.pairs.ny = same_cluster - same_both;
    t.pairs.nn = pairs(n) - same_class - same_cluster + same_both;
    return t;
}

// ---------------------------------------------------------------------------
// internal

namespace {

enum Internal {
    kBetween, kBanfeldRaftery, kBallHall, kPBM, kDetRatio, kLogDetRatio, kKsqDetW, kScore, kSilhouette,
    kLogSSRatio, kCIndex, kDunn, kRayTuri, kCalinskiHarabasz, kTraceWiB, kDaviesBouldin, kWithin
};

// log-determinant of a symmetric PSD matrix; -inf when not positive definite.
double log_det(const Matrix& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Vector diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 1e-150).any()) return -std::numeric_limits<double>::infinity();
    return 2.0 * diag.array().log().sum();
}

}  // namespace

InternalValues internal_indices(const Matrix& x, const cluster::Assignment& a) {
    return internal_indices(x, a, distance_matrix(x));
}

InternalValues internal_indices(const Matrix& x, const cluster::Assignment& a, const Matrix& dist) {
    InternalValues v;
    v.fill(kNaN);
    const auto n = x.rows();
    const auto p = x.cols();
    const int k = a.k;
    if (static_cast<Eigen::Index>(a.labels.size()) != n || k < 1) throw ValidationError("assignment does not cover data");
    const double nd = static_cast<double>(n);

    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    Matrix centroids = Matrix::Zero(k, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = a.labels[static_cast<std::size_t>(i)];
        centroids.row(c) += x.row(i);
        ++sizes[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) centroids.row(c) /= std::max(1, sizes[static_cast<std::size_t>(c)]);
    const Eigen::RowVectorXd center = x.colwise().mean();

    // Scatter matrices; determinants and inverses use only columns with spread.
    std::vector<Eigen::Index> live;
    for (Eigen::Index j = 0; j < p; ++j)
        if ((x.col(j).array() - center(j)).abs().maxCoeff() > 0.0) live.push_back(j);
    const auto q = static_cast<Eigen::Index>(live.size());
    Matrix within = Matrix::Zero(q, q);
    Matrix between = Matrix::Zero(q, q);
    std::vector<double> cluster_trace(static_cast<std::size_t>(k), 0.0);
    std::vector<double> mean_to_center(static_cast<std::size_t>(k), 0.0);
    double sum_to_centroid = 0.0;
    double sum_to_center = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int c = a.labels[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd dev = x.row(i) - centroids.row(c);
        Vector dl(q);
        for (Eigen::Index j = 0; j < q; ++j) dl(j) = dev(live[static_cast<std::size_t>(j)]);
        within.noalias() += dl * dl.transpose();
        cluster_trace[static_cast<std::size_t>(c)] += dev.squaredNorm();
        const double r = dev.norm();
        mean_to_center[static_cast<std::size_t>(c)] += r;
        sum_to_centroid += r;
        sum_to_center += (x.row(i) - center).norm();
    }
    for (int c = 0; c < k; ++c) {
        const Eigen::RowVectorXd dev = centroids.row(c) - center;
        Vector dl(q);
        for (Eigen::Index j = 0; j < q; ++j) dl(j) = dev(live[static_cast<std::size_t>(j)]);
        between.noalias() += sizes[static_cast<std::size_t>(c)] * (dl * dl.transpose());
        mean_to_center[static_cast<std::size_t>(c)] /= std::max(1, sizes[static_cast<std::size_t>(c)]);
    }
    const double wgss = std::accumulate(cluster_trace.begin(), cluster_trace.end(), 0.0);
    double bgss = 0.0;
    for (int c = 0; c < k; ++c) bgss += sizes[static_cast<std::size_t>(c)] * (centroids.row(c) - center).squaredNorm();

    v[kBetween] = bgss;
    v[kWithin] = wgss;

    double ball_hall = 0.0;
    double banfeld = 0.0;
    for (int c = 0; c < k; ++c) {
        const double nc = sizes[static_cast<std::size_t>(c)];
        ball_hall += cluster_trace[static_cast<std::size_t>(c)] / nc;
        banfeld += nc * std::log(cluster_trace[static_cast<std::size_t>(c)] / nc);
    }
    v[kBallHall] = ball_hall / k;
    v[kBanfeldRaftery] = banfeld;

    const double logdet_w = log_det(within);
    const double logdet_t = log_det(within + between);
    v[kKsqDetW] = static_cast<double>(k) * k * std::exp(logdet_w);

    // Score function: between-class distance vs within-class distance.
    double bcd = 0.0;
    double wcd = 0.0;
    for (int c = 0; c < k; ++c) {
        bcd += sizes[static_cast<std::size_t>(c)] * (centroids.row(c) - center).norm();
        wcd += mean_to_center[static_cast<std::size_t>(c)];
    }
    bcd /= nd * k;
    v[kScore] = 1.0 - 1.0 / std::exp(std::exp(bcd - wcd));

    if (k < 2) return v;

    v[kDetRatio] = std::exp(logdet_t - logdet_w);
    v[kLogDetRatio] = nd * (logdet_t - logdet_w);
    v[kLogSSRatio] = std::log(bgss / wgss);
    v[kCalinskiHarabasz] = (nd - k) / (k - 1.0) * bgss / wgss;
    {
        Eigen::LLT<Matrix> llt(within);
        if (q > 0 && llt.info() == Eigen::Success && std::isfinite(logdet_w))
            v[kTraceWiB] = llt.solve(between).trace();
    }

    double min_centroid_sq = std::numeric_limits<double>::infinity();
    double max_centroid = 0.0;
    double db = 0.0;
    for (int c = 0; c < k; ++c) {
        double worst = 0.0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            const double sep = (centroids.row(c) - centroids.row(o)).norm();
            min_centroid_sq = std::min(min_centroid_sq, sep * sep);
            max_centroid = std::max(max_centroid, sep);
            worst = std::max(worst, (mean_to_center[static_cast<std::size_t>(c)] + mean_to_center[static_cast<std::size_t>(o)]) / sep);
        }
        db += worst;
    }
    v[kDaviesBouldin] = db / k;
    v[kRayTuri] = (wgss / nd) / min_centroid_sq;
    {
        const double ratio = sum_to_center / sum_to_centroid * max_centroid / k;
        v[kPBM] = ratio * ratio;
    }

    // Pairwise-distance indices.
    double min_between = std::numeric_limits<double>::infinity();
    double max_diameter = 0.0;
    std::vector<double> all_pairs;
    all_pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    double within_sum = 0.0;
    long long within_pairs = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = dist(i, j);
            all_pairs.push_back(d);
            if (a.labels[static_cast<std::size_t>(i)] == a.labels[static_cast<std::size_t>(j)]) {
                within_sum += d;
                ++within_pairs;
                max_diameter = std::max(max_diameter, d);
            } else {
                min_between = std::min(min_between, d);
            }
        }
    }
    v[kDunn] = min_between / max_diameter;
    if (within_pairs > 0) {
        std::sort(all_pairs.begin(), all_pairs.end());
        const auto m = static_cast<std::size_t>(within_pairs);
        const double s_min = std::accumulate(all_pairs.begin(), all_pairs.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
        const double s_max = std::accumulate(all_pairs.end() - static_cast<std::ptrdiff_t>(m), all_pairs.end(), 0.0);
        v[kCIndex] = (within_sum - s_min) / (s_max - s_min);
    }

    // Silhouette: mean over clusters of the mean per-point width; singleton points score 0.
    std::vector<double> width_sum(static_cast<std::size_t>(k), 0.0);
    std::vector<double> to_cluster(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::fill(to_cluster.begin(), to_cluster.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) to_cluster[static_cast<std::size_t>(a.labels[static_cast<std::size_t>(j)])] += dist(i, j);
        const int own = a.labels[static_cast<std::size_t>(i)];
        const int own_size = sizes[static_cast<std::size_t>(own)];
        if (own_size <= 1) continue;
        const double ai = to_cluster[static_cast<std::size_t>(own)] / (own_size - 1);
        double bi = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own) bi = std::min(bi, to_cluster[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
        const double denom = std::max(ai, bi);
        width_sum[static_cast<std::size_t>(own)] += denom > 0.0 ? (bi - ai) / denom : 0.0;
    }
    double silhouette = 0.0;
    for (int c = 0; c < k; ++c) silhouette += width_sum[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)];
    v[kSilhouette] = silhouette / k;
    return v;
}

// ---------------------------------------------------------------------------
// external

namespace {

double xlogx_ratio(double count, double total) { return count > 0 ? (count / total) * std::log(count / total) : 0.0; }

// Expected mutual information of two random labelings with the given marginals.
double expected_mutual_information(const std::vector<long long>& a, const std::vector<long long>& b, long long n) {
    const double nd = static_cast<double>(n);
    double emi = 0.0;
    const double lg_n = std::lgamma(nd + 1.0);
    for (long long ai : a) {
        for (long long bj : b) {
            const long long lo = std::max(1LL, ai + bj - n);
            const long long hi = std::min(ai, bj);
            const double common = std::lgamma(ai + 1.0) + std::lgamma(bj + 1.0) + std::lgamma(nd - ai + 1.0) +
                                  std::lgamma(nd - bj + 1.0) - lg_n;
            for (long long nij = lo; nij <= hi; ++nij) {
                const double term = (nij / nd) * std::log(nd * nij / (static_cast<double>(ai) * bj));
                const double lp = common - std::lgamma(nij + 1.0) - std::lgamma(ai - nij + 1.0) -
                                  std::lgamma(bj - nij + 1.0) - std::lgamma(nd - ai - bj + nij + 1.0);
                emi += term * std::exp(lp);
            }
        }
    }
    return emi;
}

}  // namespace

ExternalValues external_indices(const Labels& classes, const cluster::Assignment& a) {
    ExternalValues v;
    v.fill(kNaN);
    const ContingencyTable t = contingency(classes, a.labels);
    const auto& pc = t.pairs;
    const double n_t = pc.total();
    const double same_class = pc.yy + pc.yn;
    const double same_cluster = pc.yy + pc.ny;
    const auto n = static_cast<long long>(classes.size());
    const double nd = static_cast<double>(n);

    const double precision = pc.yy / (pc.yy + pc.ny);
    const double recall = pc.yy / (pc.yy + pc.yn);
    const double f1_same = 2.0 * pc.yy / (2.0 * pc.yy + pc.yn + pc.ny);
    const double f1_diff = 2.0 * pc.nn / (2.0 * pc.nn + pc.yn + pc.ny);

    // Information-theoretic quantities from the cluster x class table.
    std::vector<long long> cluster_sizes;
    std::vector<long long> class_sizes(2, 0);
    for (const auto& row : t.counts) {
        cluster_sizes.push_back(row[0] + row[1]);
        class_sizes[0] += row[0];
        class_sizes[1] += row[1];
    }
    double h_class = 0.0;
    double h_cluster = 0.0;
    for (long long c : class_sizes) h_class -= xlogx_ratio(static_cast<double>(c), nd);
    for (long long c : cluster_sizes) h_cluster -= xlogx_ratio(static_cast<double>(c), nd);
    double mi = 0.0;
    double h_class_given_cluster = 0.0;
    double h_cluster_given_class = 0.0;
    long long majority_sum = 0;
    for (std::size_t k = 0; k < t.counts.size(); ++k) {
        majority_sum += std::max(t.counts[k][0], t.counts[k][1]);
        for (int c = 0; c < 2; ++c) {
            const double nkc = static_cast<double>(t.counts[k][static_cast<std::size_t>(c)]);
            if (nkc <= 0) continue;
            const double nk = static_cast<double>(cluster_sizes[k]);
            const double ncl = static_cast<double>(class_sizes[static_cast<std::size_t>(c)]);
            mi += (nkc / nd) * std::log(nd * nkc / (nk * ncl));
            h_class_given_cluster -= (nkc / nd) * std::log(nkc / nk);
            h_cluster_given_class -= (nkc / nd) * std::log(nkc / ncl);
        }
    }
    mi = std::max(mi, 0.0);
    const double homogeneity = h_class > 0.0 ? 1.0 - h_class_given_cluster / h_class : 1.0;
    const double completeness = h_cluster > 0.0 ? 1.0 - h_cluster_given_class / h_cluster : 1.0;
    const bool trivial = cluster_sizes.size() <= 1 && (class_sizes[0] == 0 || class_sizes[1] == 0);

    double nmi = 0.0;
    if (trivial || (h_class == 0.0 && h_cluster == 0.0))
        nmi = 1.0;
    else if (mi > 0.0)
        nmi = std::clamp(mi / (0.5 * (h_class + h_cluster)), 0.0, 1.0);

    double ami = 1.0;
    if (!trivial) {
        std::vector<long long> nonzero_classes;
        for (long long c : class_sizes)
            if (c > 0) nonzero_classes.push_back(c);
        const double emi = expected_mutual_information(cluster_sizes, nonzero_classes, n);
        double denom = 0.5 * (h_class + h_cluster) - emi;
        const double eps = std::numeric_limits<double>::epsilon();
        denom = denom < 0 ? std::min(denom, -eps) : std::max(denom, eps);
        ami = (mi - emi) / denom;
    }

    const double expected_yy = same_class * same_cluster / n_t;
    const double ari_max = 0.5 * (same_class + same_cluster);
    const double ari = ari_max == expected_yy ? 1.0 : (pc.yy - expected_yy) / (ari_max - expected_yy);

    v[0] = h_class_given_cluster;                                        // Entropy
    v[1] = static_cast<double>(majority_sum) / nd;                       // Purity
    v[2] = recall;                                                        // Recall
    v[3] = pc.yy / std::sqrt(same_class * same_cluster);                 // Folkes-Mallows
    v[4] = (pc.yy + pc.nn) / (pc.yy + pc.nn + 2.0 * (pc.yn + pc.ny));    // Rogers-Tanimoto
    v[5] = f1_same;                                                       // F1
    v[6] = 0.5 * (precision + recall);                                    // Kulczynski
    v[7] = nmi;                                                           // Norm-Mutual-Info
    v[8] = pc.yy / (pc.yy + 2.0 * (pc.yn + pc.ny));                       // Sokal-Sneath-1
    v[9] = (pc.yy + pc.nn) / n_t;                                         // Rand
    v[10] = (n_t * pc.yy - same_class * same_cluster) /
            std::sqrt(same_class * same_cluster * (n_t - same_class) * (n_t - same_cluster));  // Hubert-Gamma
    v[11] = homogeneity;
    v[12] = completeness;
    v[13] = homogeneity + completeness > 0.0 ? 2.0 * homogeneity * completeness / (homogeneity + completeness) : 0.0;
    v[14] = pc.yy / (pc.yy + pc.yn + pc.ny);                              // Jaccard
    v[15] = ari;                                                          // Adj-Rand
    v[16] = (pc.yy * pc.nn - pc.yn * pc.ny) /
            ((pc.yy + pc.yn) * (pc.yy + pc.ny) * (pc.yn + pc.nn) * (pc.ny + pc.nn));  // Phi
    v[17] = (pc.nn - pc.ny) / std::sqrt(pc.nn + pc.ny);                   // McNemar
    v[18] = pc.yy / n_t;                                                  // Russel-Rao
    v[19] = precision;                                                    // Precision
    v[20] = (same_class * f1_same + (n_t - same_class) * f1_diff) / n_t;  // Weighted-F1
    v[21] = (pc.yy + pc.nn) / (pc.yy + pc.nn + 0.5 * (pc.yn + pc.ny));    // Sokal-Sneath-2
    v[22] = ami;                                                          // Adj-Mutual-Info
    return v;
}

// ---------------------------------------------------------------------------

IndexVector index_vector(const Matrix& features, const Labels& labels, const std::vector<cluster::Method>& methods,
                         std::uint64_t seed, const VectorOptions& options) {
    if (methods.empty()) throw ValidationError("at least one clustering method is required");
    IndexVector iv;
    iv.schema = Schema{methods}.names();
    iv.values.reserve(iv.schema.size());
    const Matrix dist = distance_matrix(features);
    for (cluster::Method m : methods) {
        const auto a = cluster::cluster(features, m, derive_seed(seed, static_cast<std::uint64_t>(m)), options.clustering);
        if (a.failed) {
            spdlog::warn("{} clustering failed ({}); emitting a zero index block", cluster::method_name(m),
                         a.failure_reason);
            iv.values.insert(iv.values.end(), kPerMethod, 0.0);
            continue;
        }
        for (double x : internal_indices(features, a, dist)) iv.values.push_back(sanitize(x));
        for (double x : external_indices(labels, a)) iv.values.push_back(sanitize(x));
    }
    return iv;
}

IndexVector index_vector(const data::Subsample& s, const std::vector<cluster::Method>& methods, std::uint64_t seed,
                         const VectorOptions& options) {
    IndexVector iv = index_vector(s.features, s.labels, methods, seed, options);
    iv.subsample_ref = s.parent_name;
    return iv;
}

}  // namespace ciams::indices
