#include "ciams/cluster.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace ciams::cluster {

std::string method_name(Method m) {
    switch (m) {
        case Method::KMeans: return "KMeans";
        case Method::Agglomerative: return "Agglomerative";
        case Method::Spectral: return "Spectral";
        case Method::HDBSCAN: return "HDBSCAN";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (Method m : kAllMethods) {
        std::string canonical = method_name(m);
        if (name.size() != canonical.size()) continue;
        bool same = true;
        for (std::size_t i = 0; i < name.size(); ++i)
            same = same && std::tolower(static_cast<unsigned char>(name[i])) ==
                               std::tolower(static_cast<unsigned char>(canonical[i]));
        if (same) return m;
    }
    return std::nullopt;
}

void compact_labels(Assignment& a) {
    std::map<int, int> remap;
    for (int& l : a.labels) {
        auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
        l = it->second;
    }
    a.k = static_cast<int>(remap.size());
}

namespace {

double sq_dist(const Matrix& x, Eigen::Index i, Eigen::Index j) { return (x.row(i) - x.row(j)).squaredNorm(); }

// Groups identical rows; returns group id per row (first-appearance order).
std::vector<int> identical_row_groups(const Matrix& x, int& groups) {
    const auto n = x.rows();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](int a, int b) {
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
        return a < b;
    };
    std::sort(order.begin(), order.end(), less);
    std::vector<int> group(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && x.row(order[i]) == x.row(order[i - 1]))
            group[static_cast<std::size_t>(order[i])] = group[static_cast<std::size_t>(order[i - 1])];
        else
            group[static_cast<std::size_t>(order[i])] = next++;
    }
    groups = next;
    return group;
}

}  // namespace

// ---------------------------------------------------------------------------
// k-means

namespace {

struct LloydRun {
    std::vector<int> labels;
    Matrix centers;
    double inertia = 0.0;
    std::vector<double> trace;
    int iterations = 0;
};

Matrix kmeanspp_seed(const Matrix& x, int k, std::mt19937_64& rng) {
    const auto n = x.rows();
    Matrix centers(k, x.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    centers.row(0) = x.row(first(rng));
    Vector closest(n);
    for (Eigen::Index i = 0; i < n; ++i) closest(i) = (x.row(i) - centers.row(0)).squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int c = 1; c < k; ++c) {
        const double total = closest.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double target = unit(rng) * total;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= closest(i);
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        centers.row(c) = x.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i)
            closest(i) = std::min(closest(i), (x.row(i) - centers.row(c)).squaredNorm());
    }
    return centers;
}

LloydRun lloyd(const Matrix& x, Matrix centers, int max_iterations) {
    const auto n = x.rows();
    const auto k = centers.rows();
    LloydRun run;
    run.labels.assign(static_cast<std::size_t>(n), -1);
    Vector cost(n);
    for (int it = 0; it < max_iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double dd = (x.row(i) - centers.row(c)).squaredNorm();
                if (dd < best_d) {
                    best_d = dd;
                    best = static_cast<int>(c);
                }
            }
            cost(i) = best_d;
            if (run.labels[static_cast<std::size_t>(i)] != best) {
                run.labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        run.iterations = it + 1;
        if (!changed && it > 0) break;
        // Update step. An empty cluster takes over the worst-served point.
        Matrix sums = Matrix::Zero(k, x.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(run.labels[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            } else {
                Eigen::Index worst = 0;
                cost.maxCoeff(&worst);
                centers.row(c) = x.row(worst);
                cost(worst) = 0.0;
            }
        }
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            inertia += (x.row(i) - centers.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
        run.trace.push_back(inertia);
    }
    run.centers = std::move(centers);
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        run.inertia += (x.row(i) - run.centers.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
    return run;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts, int max_iterations) {
    if (k < 1 || x.rows() < k) throw ValidationError("k-means needs at least k rows");
    LloydRun best;
    bool have = false;
    for (int r = 0; r < std::max(1, restarts); ++r) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        LloydRun run = lloyd(x, kmeanspp_seed(x, k, rng), max_iterations);
        if (!have || run.inertia < best.inertia) {
            best = std::move(run);
            have = true;
        }
    }
    KMeansResult out;
    out.labels = std::move(best.labels);
    out.centers = std::move(best.centers);
    out.inertia = best.inertia;
    out.inertia_trace = std::move(best.trace);
    out.iterations = best.iterations;
    return out;
}

// ---------------------------------------------------------------------------
// Ward

namespace {

class Condensed {
public:
    explicit Condensed(Eigen::Index n) : n_(n), data_(static_cast<std::size_t>(n * (n - 1) / 2), 0.0) {}
    double& operator()(Eigen::Index i, Eigen::Index j) {
        if (i > j) std::swap(i, j);
        return data_[static_cast<std::size_t>(n_ * i - i * (i + 1) / 2 + (j - i - 1))];
    }

private:
    Eigen::Index n_;
    std::vector<double> data_;
};

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[static_cast<std::size_t>(a)] != a) {
            parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
            a = parent[static_cast<std::size_t>(a)];
        }
        return a;
    }
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (b < a) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        return a;
    }
};

}  // namespace

std::vector<Merge> ward_linkage(const Matrix& x) {
    const auto n = x.rows();
    if (n < 2) return {};
    Condensed dist(n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) dist(i, j) = sq_dist(x, i, j);

    std::vector<int> size(static_cast<std::size_t>(n), 1);
    std::vector<bool> active(static_cast<std::size_t>(n), true);
    struct Raw {
        int a, b;
        double h;
        int size;
    };
    std::vector<Raw> raw;
    raw.reserve(static_cast<std::size_t>(n - 1));
    std::vector<int> chain;
    int remaining = static_cast<int>(n);
    while (remaining > 1) {
        if (chain.empty()) {
            for (int i = 0; i < n; ++i)
                if (active[static_cast<std::size_t>(i)]) {
                    chain.push_back(i);
                    break;
                }
        }
        for (;;) {
            const int a = chain.back();
            const int prev = chain.size() >= 2 ? chain[chain.size() - 2] : -1;
            int b = -1;
            double best = std::numeric_limits<double>::infinity();
            if (prev >= 0) {
                b = prev;
                best = dist(a, prev);
            }
            for (int c = 0; c < n; ++c) {
                if (c == a || !active[static_cast<std::size_t>(c)]) continue;
                const double dc = dist(a, c);
                if (dc < best) {
                    best = dc;
                    b = c;
                }
            }
            if (b == prev) {
                chain.pop_back();
                chain.pop_back();
                const int keep = std::min(a, b);
                const int drop = std::max(a, b);
                const double na = size[static_cast<std::size_t>(a)];
                const double nb = size[static_cast<std::size_t>(b)];
                for (int c = 0; c < n; ++c) {
                    if (c == a || c == b || !active[static_cast<std::size_t>(c)]) continue;
                    const double nc = size[static_cast<std::size_t>(c)];
                    dist(keep, c) = ((na + nc) * dist(a, c) + (nb + nc) * dist(b, c) - nc * best) / (na + nb + nc);
                }
                raw.push_back({a, b, best, static_cast<int>(na + nb)});
                size[static_cast<std::size_t>(keep)] = static_cast<int>(na + nb);
                active[static_cast<std::size_t>(drop)] = false;
                --remaining;
                break;
            }
            chain.push_back(b);
        }
    }
    std::stable_sort(raw.begin(), raw.end(), [](const Raw& l, const Raw& r) { return l.h < r.h; });

    UnionFind uf(static_cast<int>(n));
    std::vector<int> node_of(static_cast<std::size_t>(n));
    std::iota(node_of.begin(), node_of.end(), 0);
    std::vector<Merge> merges;
    merges.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const int ra = uf.find(raw[i].a);
        const int rb = uf.find(raw[i].b);
        Merge m;
        m.a = std::min(node_of[static_cast<std::size_t>(ra)], node_of[static_cast<std::size_t>(rb)]);
        m.b = std::max(node_of[static_cast<std::size_t>(ra)], node_of[static_cast<std::size_t>(rb)]);
        m.height = raw[i].h;
        m.size = raw[i].size;
        merges.push_back(m);
        const int root = uf.unite(ra, rb);
        node_of[static_cast<std::size_t>(root)] = static_cast<int>(n + static_cast<Eigen::Index>(i));
    }
    return merges;
}

std::vector<int> cut_hierarchy(const std::vector<Merge>& merges, int n, int k) {
    k = std::clamp(k, 1, n);
    // Each node id maps to one representative point.
    std::vector<int> rep(static_cast<std::size_t>(n) + merges.size());
    std::iota(rep.begin(), rep.begin() + n, 0);
    UnionFind uf(n);
    for (std::size_t i = 0; i < merges.size(); ++i) {
        const int ra = rep[static_cast<std::size_t>(merges[i].a)];
        const int rb = rep[static_cast<std::size_t>(merges[i].b)];
        rep[static_cast<std::size_t>(n) + i] = ra;
        if (static_cast<int>(i) < n - k) uf.unite(ra, rb);
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    std::map<int, int> ids;
    for (int i = 0; i < n; ++i) {
        auto [it, inserted] = ids.try_emplace(uf.find(i), static_cast<int>(ids.size()));
        labels[static_cast<std::size_t>(i)] = it->second;
    }
    return labels;
}

// ---------------------------------------------------------------------------
// spectral

Matrix rbf_affinity(const Matrix& x) {
    const auto n = x.rows();
    Matrix sq(n, n);
    std::vector<double> pairs;
    pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        sq(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double d = sq_dist(x, i, j);
            sq(i, j) = sq(j, i) = d;
            pairs.push_back(d);
        }
    }
    double median = 1.0;
    if (!pairs.empty()) {
        auto mid = pairs.begin() + static_cast<std::ptrdiff_t>(pairs.size() / 2);
        std::nth_element(pairs.begin(), mid, pairs.end());
        median = *mid;
        if (pairs.size() % 2 == 0) {
            const double lower = *std::max_element(pairs.begin(), mid);
            median = 0.5 * (median + lower);
        }
        if (!(median > 0.0)) median = 1.0;
    }
    Matrix w = (-sq.array() / median).exp().matrix();
    w.diagonal().setZero();
    return w;
}

namespace {

// Top-k eigenvectors of a symmetric matrix with spectrum in [-1, 1] by orthogonal
// iteration on (m + I). Returns false when the subspace does not settle.
bool top_eigenvectors_iterative(const Matrix& m, int k, std::uint64_t seed, Matrix& out) {
    const auto n = m.rows();
    const int block = std::min<int>(static_cast<int>(n), k + 8);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix q(n, block);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(q);
    q = qr.householderQ() * Matrix::Identity(n, block);
    Matrix shifted = m;
    shifted.diagonal().array() += 1.0;
    for (int it = 0; it < 2000; ++it) {
        Matrix z = shifted * q;
        Eigen::HouseholderQR<Matrix> step(z);
        Matrix next = step.householderQ() * Matrix::Identity(n, block);
        // Rayleigh-Ritz on the block to align the leading vectors.
        Matrix small = next.transpose() * shifted * next;
        Eigen::SelfAdjointEigenSolver<Matrix> es(small);
        if (es.info() != Eigen::Success) return false;
        next = next * es.eigenvectors();
        Matrix lead = next.rightCols(k);
        Matrix residual = shifted * lead - lead * es.eigenvalues().tail(k).asDiagonal();
        q = next;
        if (residual.norm() < 1e-8 * std::sqrt(static_cast<double>(n))) {
            out = lead;
            return true;
        }
    }
    return false;
}

}  // namespace

Assignment spectral_partition(const Matrix& affinity, int k, std::uint64_t seed) {
    const auto n = affinity.rows();
    Assignment a;
    a.method = Method::Spectral;
    Vector inv_sqrt_deg(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = affinity.row(i).sum();
        inv_sqrt_deg(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
    }
    // Bottom eigenvectors of I - D^-1/2 W D^-1/2 are the top ones of the normalized affinity.
    Matrix normalized = inv_sqrt_deg.asDiagonal() * affinity * inv_sqrt_deg.asDiagonal();
    Matrix embedding;
    constexpr Eigen::Index kDenseLimit = 1500;
    if (n <= kDenseLimit) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(normalized);
        if (es.info() != Eigen::Success) {
            a.failed = true;
            a.failure_reason = "eigen-solver did not converge";
            return a;
        }
        embedding = es.eigenvectors().rightCols(k);
    } else if (!top_eigenvectors_iterative(normalized, k, derive_seed(seed, 17), embedding)) {
        a.failed = true;
        a.failure_reason = "eigen-solver did not converge";
        return a;
    }
    if (!embedding.allFinite()) {
        a.failed = true;
        a.failure_reason = "non-finite spectral embedding";
        return a;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = embedding.row(i).norm();
        if (norm > 0.0) embedding.row(i) /= norm;
    }
    int groups = 0;
    auto distinct = identical_row_groups(embedding, groups);
    if (groups < k) {
        a.labels = std::move(distinct);
    } else {
        a.labels = kmeans(embedding, k, derive_seed(seed, 29)).labels;
    }
    compact_labels(a);
    return a;
}

// ---------------------------------------------------------------------------
// HDBSCAN

int hdbscan_min_cluster_size(int n, double fraction) {
    return std::max(5, static_cast<int>(std::ceil(fraction * n - 1e-9)));
}

std::vector<int> hdbscan(const Matrix& x, int min_cluster_size) {
    const int n = static_cast<int>(x.rows());
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    if (n < 2 || n < min_cluster_size) return labels;
    const int min_samples = min_cluster_size;

    Matrix dist(n, n);
    for (int i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (int j = i + 1; j < n; ++j) dist(i, j) = dist(j, i) = std::sqrt(sq_dist(x, i, j));
    }
    // Core distance: distance to the min_samples-th neighbour, the point itself included.
    std::vector<double> core(static_cast<std::size_t>(n));
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
        const auto kth = static_cast<std::ptrdiff_t>(std::min(min_samples, n) - 1);
        std::nth_element(row.begin(), row.begin() + kth, row.end());
        core[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(kth)];
    }
    auto reach = [&](int i, int j) {
        return std::max({core[static_cast<std::size_t>(i)], core[static_cast<std::size_t>(j)], dist(i, j)});
    };

    // Prim's minimum spanning tree over mutual reachability distances.
    struct Edge {
        int a, b;
        double w;
    };
    std::vector<Edge> mst;
    mst.reserve(static_cast<std::size_t>(n - 1));
    std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<int> from(static_cast<std::size_t>(n), -1);
    int current = 0;
    in_tree[0] = true;
    for (int step = 1; step < n; ++step) {
        for (int j = 0; j < n; ++j) {
            if (in_tree[static_cast<std::size_t>(j)]) continue;
            const double w = reach(current, j);
            if (w < best[static_cast<std::size_t>(j)]) {
                best[static_cast<std::size_t>(j)] = w;
                from[static_cast<std::size_t>(j)] = current;
            }
        }
        int next = -1;
        for (int j = 0; j < n; ++j)
            if (!in_tree[static_cast<std::size_t>(j)] &&
                (next < 0 || best[static_cast<std::size_t>(j)] < best[static_cast<std::size_t>(next)]))
                next = j;
        mst.push_back({from[static_cast<std::size_t>(next)], next, best[static_cast<std::size_t>(next)]});
        in_tree[static_cast<std::size_t>(next)] = true;
        current = next;
    }
    std::stable_sort(mst.begin(), mst.end(), [](const Edge& l, const Edge& r) { return l.w < r.w; });

    // Single-linkage dendrogram: nodes n..2n-2.
    const int total = 2 * n - 1;
    std::vector<int> left(static_cast<std::size_t>(total), -1), right(static_cast<std::size_t>(total), -1);
    std::vector<int> node_size(static_cast<std::size_t>(total), 1);
    std::vector<double> node_dist(static_cast<std::size_t>(total), 0.0);
    {
        UnionFind uf(n);
        std::vector<int> node_of(static_cast<std::size_t>(n));
        std::iota(node_of.begin(), node_of.end(), 0);
        for (int i = 0; i < n - 1; ++i) {
            const int ra = uf.find(mst[static_cast<std::size_t>(i)].a);
            const int rb = uf.find(mst[static_cast<std::size_t>(i)].b);
            const int node = n + i;
            left[static_cast<std::size_t>(node)] = node_of[static_cast<std::size_t>(ra)];
            right[static_cast<std::size_t>(node)] = node_of[static_cast<std::size_t>(rb)];
            node_size[static_cast<std::size_t>(node)] = node_size[static_cast<std::size_t>(left[static_cast<std::size_t>(node)])] +
                                                        node_size[static_cast<std::size_t>(right[static_cast<std::size_t>(node)])];
            node_dist[static_cast<std::size_t>(node)] = mst[static_cast<std::size_t>(i)].w;
            node_of[static_cast<std::size_t>(uf.unite(ra, rb))] = node;
        }
    }
    auto lambda_of = [](double d) { return 1.0 / std::max(d, 1e-12); };

    // Condensed tree: clusters with birth lambda, parent, and fall-out events.
    struct Cluster {
        int parent = -1;
        double birth = 0.0;
        double stability = 0.0;
        std::vector<int> children;
    };
    std::vector<Cluster> clusters;
    std::vector<int> point_cluster(static_cast<std::size_t>(n), -1);  // cluster the point fell out of
    clusters.push_back(Cluster{});                                      // root, birth lambda 0

    auto collect_points = [&](int node, std::vector<int>& out) {
        std::vector<int> stack{node};
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            if (v < n)
                out.push_back(v);
            else {
                stack.push_back(left[static_cast<std::size_t>(v)]);
                stack.push_back(right[static_cast<std::size_t>(v)]);
            }
        }
    };

    struct Work {
        int node;
        int cluster;
    };
    std::vector<Work> work{{total - 1, 0}};
    while (!work.empty()) {
        auto [node, cid] = work.back();
        work.pop_back();
        if (node < n) {
            // A lone point reached as the continuation of a cluster: it leaves at the cluster's own scale.
            point_cluster[static_cast<std::size_t>(node)] = cid;
            continue;
        }
        const double lam = lambda_of(node_dist[static_cast<std::size_t>(node)]);
        const int l = left[static_cast<std::size_t>(node)];
        const int r = right[static_cast<std::size_t>(node)];
        const bool l_big = node_size[static_cast<std::size_t>(l)] >= min_cluster_size;
        const bool r_big = node_size[static_cast<std::size_t>(r)] >= min_cluster_size;
        auto fall_out = [&](int child) {
            std::vector<int> pts;
            collect_points(child, pts);
            for (int p : pts) {
                point_cluster[static_cast<std::size_t>(p)] = cid;
                clusters[static_cast<std::size_t>(cid)].stability += lam - clusters[static_cast<std::size_t>(cid)].birth;
            }
        };
        if (l_big && r_big) {
            for (int child : {l, r}) {
                Cluster c;
                c.parent = cid;
                c.birth = lam;
                clusters.push_back(c);
                const int new_id = static_cast<int>(clusters.size()) - 1;
                clusters[static_cast<std::size_t>(cid)].children.push_back(new_id);
                clusters[static_cast<std::size_t>(cid)].stability +=
                    (lam - clusters[static_cast<std::size_t>(cid)].birth) * node_size[static_cast<std::size_t>(child)];
                work.push_back({child, new_id});
            }
        } else if (l_big) {
            fall_out(r);
            work.push_back({l, cid});
        } else if (r_big) {
            fall_out(l);
            work.push_back({r, cid});
        } else {
            fall_out(l);
            fall_out(r);
        }
    }
    // Excess-of-mass selection, leaves first; the root is never selected.
    const int nc = static_cast<int>(clusters.size());
    std::vector<bool> selected(static_cast<std::size_t>(nc), false);
    std::vector<double> subtree(static_cast<std::size_t>(nc), 0.0);
    for (int c = nc - 1; c >= 1; --c) {
        double child_sum = 0.0;
        for (int ch : clusters[static_cast<std::size_t>(c)].children) child_sum += subtree[static_cast<std::size_t>(ch)];
        if (clusters[static_cast<std::size_t>(c)].children.empty() ||
            clusters[static_cast<std::size_t>(c)].stability >= child_sum) {
            selected[static_cast<std::size_t>(c)] = true;
            subtree[static_cast<std::size_t>(c)] = clusters[static_cast<std::size_t>(c)].stability;
            std::vector<int> stack(clusters[static_cast<std::size_t>(c)].children);
            while (!stack.empty()) {
                int v = stack.back();
                stack.pop_back();
                selected[static_cast<std::size_t>(v)] = false;
                for (int ch : clusters[static_cast<std::size_t>(v)].children) stack.push_back(ch);
            }
        } else {
            subtree[static_cast<std::size_t>(c)] = child_sum;
        }
    }
    std::vector<int> label_of(static_cast<std::size_t>(nc), -1);
    int next_label = 0;
    for (int c = 1; c < nc; ++c)
        if (selected[static_cast<std::size_t>(c)]) label_of[static_cast<std::size_t>(c)] = next_label++;
    for (int p = 0; p < n; ++p) {
        int c = point_cluster[static_cast<std::size_t>(p)];
        while (c > 0 && !selected[static_cast<std::size_t>(c)]) c = clusters[static_cast<std::size_t>(c)].parent;
        labels[static_cast<std::size_t>(p)] = c > 0 ? label_of[static_cast<std::size_t>(c)] : -1;
    }
    return labels;
}

Assignment resolve_noise(const Assignment& a, const Matrix& x) {
    Assignment out = a;
    const auto n = static_cast<Eigen::Index>(a.labels.size());
    std::vector<int> members;
    for (Eigen::Index i = 0; i < n; ++i)
        if (a.labels[static_cast<std::size_t>(i)] >= 0) members.push_back(static_cast<int>(i));
    if (members.empty()) {
        std::fill(out.labels.begin(), out.labels.end(), 0);
        out.k = n > 0 ? 1 : 0;
        return out;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (a.labels[static_cast<std::size_t>(i)] >= 0) continue;
        int nearest = members.front();
        double best = std::numeric_limits<double>::infinity();
        for (int m : members) {
            const double d = sq_dist(x, i, m);
            if (d < best) {
                best = d;
                nearest = m;
            }
        }
        out.labels[static_cast<std::size_t>(i)] = a.labels[static_cast<std::size_t>(nearest)];
    }
    compact_labels(out);
    return out;
}

// ---------------------------------------------------------------------------

Assignment cluster(const Matrix& x, Method method, std::uint64_t seed, const Options& options) {
    const int n = static_cast<int>(x.rows());
    if (n < 1) throw ValidationError("cannot cluster an empty matrix");
    if (!x.allFinite()) throw ValidationError("non-finite feature values");
    Assignment a;
    a.method = method;

    int groups = 0;
    auto distinct = identical_row_groups(x, groups);
    if (method != Method::HDBSCAN) {
        if (n < options.k) throw ValidationError("clustering infeasible: fewer rows than clusters");
        if (groups <= options.k) {
            // Too few distinct points: each distinct point is its own cluster.
            a.labels = std::move(distinct);
            compact_labels(a);
            return a;
        }
    } else if (groups == 1) {
        a.labels.assign(static_cast<std::size_t>(n), 0);
        a.noise_mask.assign(static_cast<std::size_t>(n), false);
        a.k = 1;
        return a;
    }

    switch (method) {
        case Method::KMeans:
            a.labels = kmeans(x, options.k, seed, options.kmeans_restarts, options.kmeans_max_iterations).labels;
            break;
        case Method::Agglomerative:
            a.labels = cut_hierarchy(ward_linkage(x), n, options.k);
            break;
        case Method::Spectral:
            return spectral_partition(rbf_affinity(x), options.k, seed);
        case Method::HDBSCAN: {
            a.labels = hdbscan(x, hdbscan_min_cluster_size(n, options.hdbscan_min_cluster_size_fraction));
            a.noise_mask.resize(a.labels.size());
            for (std::size_t i = 0; i < a.labels.size(); ++i) a.noise_mask[i] = a.labels[i] < 0;
            return resolve_noise(a, x);
        }
    }
    compact_labels(a);
    return a;
}

}  // namespace ciams::cluster
