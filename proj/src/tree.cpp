#include "ciams/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ciams::learners {

double Tree::evaluate(const Matrix& x, Eigen::Index row, int depth_limit) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0 && nodes[static_cast<std::size_t>(node)].depth < depth_limit) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
        node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

SortedColumns::SortedColumns(const Matrix& x) : x_(&x), order_(static_cast<std::size_t>(x.cols())) {
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& o = order_[static_cast<std::size_t>(f)];
        o.resize(static_cast<std::size_t>(x.rows()));
        std::iota(o.begin(), o.end(), 0);
        std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }
}

namespace {

double midpoint(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

// Frontier bookkeeping shared by both growers.
struct Candidate {
    double score;
    int feature = -1;
    double threshold = 0.0;
};

}  // namespace

Tree grow_classification_tree(const SortedColumns& columns, const Labels& y, const std::vector<double>& weights,
                              const ClassificationTreeParams& params) {
    const Matrix& x = columns.data();
    const auto n = x.rows();
    const auto p = static_cast<int>(x.cols());
    const int max_features = params.max_features > 0 ? std::min(params.max_features, p) : p;
    std::mt19937_64 rng(params.seed);

    Tree tree;
    std::vector<int> node_of(static_cast<std::size_t>(n), -1);
    struct Stats {
        double pos = 0, neg = 0;
    };
    Stats root;
    for (Eigen::Index r = 0; r < n; ++r) {
        const double w = weights[static_cast<std::size_t>(r)];
        if (w <= 0) continue;
        node_of[static_cast<std::size_t>(r)] = 0;
        (y[static_cast<std::size_t>(r)] > 0 ? root.pos : root.neg) += w;
    }
    auto fraction = [](const Stats& s) { return s.pos + s.neg > 0 ? s.pos / (s.pos + s.neg) : 0.0; };
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, fraction(root), 0});

    std::vector<int> frontier;
    std::vector<Stats> totals;
    if (root.pos > 0 && root.neg > 0 && params.max_depth > 0) {
        frontier.push_back(0);
        totals.push_back(root);
    }
    std::vector<int> slot_of(1, 0);
    std::vector<int> features(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);

    while (!frontier.empty()) {
        const std::size_t m = frontier.size();
        slot_of.assign(tree.nodes.size(), -1);
        for (std::size_t s = 0; s < m; ++s) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);

        // Per-node feature subsets (random forests).
        std::vector<std::vector<char>> allowed;
        if (max_features < p) {
            allowed.assign(m, std::vector<char>(static_cast<std::size_t>(p), 0));
            for (std::size_t s = 0; s < m; ++s) {
                std::shuffle(features.begin(), features.end(), rng);
                for (int f = 0; f < max_features; ++f) allowed[s][static_cast<std::size_t>(features[static_cast<std::size_t>(f)])] = 1;
            }
        }
        std::vector<Candidate> best(m);
        for (std::size_t s = 0; s < m; ++s) best[s].score = std::numeric_limits<double>::infinity();

        std::vector<Stats> left(m);
        std::vector<double> last(m);
        std::vector<char> seen(m);
        for (int f = 0; f < p; ++f) {
            std::fill(left.begin(), left.end(), Stats{});
            std::fill(seen.begin(), seen.end(), 0);
            for (int r : columns.order(f)) {
                const int nd = node_of[static_cast<std::size_t>(r)];
                if (nd < 0) continue;
                const int s = slot_of[static_cast<std::size_t>(nd)];
                if (s < 0) continue;
                if (!allowed.empty() && !allowed[static_cast<std::size_t>(s)][static_cast<std::size_t>(f)]) continue;
                const double v = x(r, f);
                if (seen[static_cast<std::size_t>(s)] && v != last[static_cast<std::size_t>(s)]) {
                    const Stats& l = left[static_cast<std::size_t>(s)];
                    const Stats& t = totals[static_cast<std::size_t>(s)];
                    const Stats rr{t.pos - l.pos, t.neg - l.neg};
                    const double wl = l.pos + l.neg;
                    const double wr = rr.pos + rr.neg;
                    // Weighted Gini of the children: W_l * (1 - sum p^2) + W_r * (1 - sum p^2).
                    const double score = (wl - (l.pos * l.pos + l.neg * l.neg) / wl) +
                                         (wr - (rr.pos * rr.pos + rr.neg * rr.neg) / wr);
                    if (score < best[static_cast<std::size_t>(s)].score - 1e-12) {
                        best[static_cast<std::size_t>(s)] = {score, f, midpoint(last[static_cast<std::size_t>(s)], v)};
                    }
                }
                const double w = weights[static_cast<std::size_t>(r)];
                (y[static_cast<std::size_t>(r)] > 0 ? left[static_cast<std::size_t>(s)].pos : left[static_cast<std::size_t>(s)].neg) += w;
                last[static_cast<std::size_t>(s)] = v;
                seen[static_cast<std::size_t>(s)] = 1;
            }
        }

        // Split every frontier node that found a valid cut.
        std::vector<int> next_frontier;
        std::vector<Stats> next_totals;
        const std::size_t first_new = tree.nodes.size();
        for (std::size_t s = 0; s < m; ++s) {
            if (best[s].feature < 0) continue;
            const int nd = frontier[s];
            const int depth = tree.nodes[static_cast<std::size_t>(nd)].depth + 1;
            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, depth});
            tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, depth});
            TreeNode& parent = tree.nodes[static_cast<std::size_t>(nd)];
            parent.feature = best[s].feature;
            parent.threshold = best[s].threshold;
            parent.left = l;
            parent.right = l + 1;
            tree.max_depth_reached = std::max(tree.max_depth_reached, depth);
        }
        if (tree.nodes.size() == first_new) break;
        std::vector<Stats> new_stats(tree.nodes.size() - first_new);
        for (Eigen::Index r = 0; r < n; ++r) {
            const int nd = node_of[static_cast<std::size_t>(r)];
            if (nd < 0) continue;
            const int s = static_cast<std::size_t>(nd) < slot_of.size() ? slot_of[static_cast<std::size_t>(nd)] : -1;
            if (s < 0 || best[static_cast<std::size_t>(s)].feature < 0) {
                node_of[static_cast<std::size_t>(r)] = -1;
                continue;
            }
            const TreeNode& parent = tree.nodes[static_cast<std::size_t>(nd)];
            const int child = x(r, parent.feature) <= parent.threshold ? parent.left : parent.right;
            node_of[static_cast<std::size_t>(r)] = child;
            Stats& cs = new_stats[static_cast<std::size_t>(child) - first_new];
            (y[static_cast<std::size_t>(r)] > 0 ? cs.pos : cs.neg) += weights[static_cast<std::size_t>(r)];
        }
        for (std::size_t c = 0; c < new_stats.size(); ++c) {
            const int id = static_cast<int>(first_new + c);
            TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
            node.value = fraction(new_stats[c]);
            if (new_stats[c].pos > 0 && new_stats[c].neg > 0 && node.depth < params.max_depth) {
                next_frontier.push_back(id);
                next_totals.push_back(new_stats[c]);
            }
        }
        // Rows in leaves no longer participate.
        std::vector<char> open(tree.nodes.size(), 0);
        for (int id : next_frontier) open[static_cast<std::size_t>(id)] = 1;
        for (auto& nd : node_of)
            if (nd >= 0 && !open[static_cast<std::size_t>(nd)]) nd = -1;
        frontier = std::move(next_frontier);
        totals = std::move(next_totals);
    }
    return tree;
}

Tree grow_boosting_tree(const SortedColumns& columns, const std::vector<double>& grad, const std::vector<double>& hess,
                        const std::vector<char>& active, const BoostingTreeParams& params,
                        std::vector<double>* feature_gain) {
    const Matrix& x = columns.data();
    const auto n = x.rows();
    const auto p = static_cast<int>(x.cols());
    const double lambda = params.lambda;
    struct Stats {
        double g = 0, h = 0;
    };
    auto leaf = [&](const Stats& s) { return s.h + lambda > 0 ? -s.g / (s.h + lambda) : 0.0; };
    auto term = [&](const Stats& s) { return s.h + lambda > 0 ? s.g * s.g / (s.h + lambda) : 0.0; };

    Tree tree;
    std::vector<int> node_of(static_cast<std::size_t>(n), -1);
    Stats root;
    for (Eigen::Index r = 0; r < n; ++r) {
        if (!active[static_cast<std::size_t>(r)]) continue;
        node_of[static_cast<std::size_t>(r)] = 0;
        root.g += grad[static_cast<std::size_t>(r)];
        root.h += hess[static_cast<std::size_t>(r)];
    }
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, leaf(root), 0});
    std::vector<int> frontier;
    std::vector<Stats> totals;
    if (params.max_depth > 0) {
        frontier.push_back(0);
        totals.push_back(root);
    }
    std::vector<int> slot_of;
    while (!frontier.empty()) {
        const std::size_t m = frontier.size();
        slot_of.assign(tree.nodes.size(), -1);
        for (std::size_t s = 0; s < m; ++s) slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
        std::vector<Candidate> best(m);
        for (std::size_t s = 0; s < m; ++s) best[s].score = 1e-12;  // minimum gain to split
        std::vector<Stats> left(m);
        std::vector<double> last(m);
        std::vector<char> seen(m);
        for (int f = 0; f < p; ++f) {
            std::fill(left.begin(), left.end(), Stats{});
            std::fill(seen.begin(), seen.end(), 0);
            for (int r : columns.order(f)) {
                const int nd = node_of[static_cast<std::size_t>(r)];
                if (nd < 0) continue;
                const int s = slot_of[static_cast<std::size_t>(nd)];
                if (s < 0) continue;
                const double v = x(r, f);
                const auto su = static_cast<std::size_t>(s);
                if (seen[su] && v != last[su]) {
                    const Stats& l = left[su];
                    const Stats& t = totals[su];
                    const Stats rr{t.g - l.g, t.h - l.h};
                    if (l.h >= params.min_child_weight && rr.h >= params.min_child_weight) {
                        const double gain = term(l) + term(rr) - term(t);
                        if (gain > best[su].score) best[su] = {gain, f, midpoint(last[su], v)};
                    }
                }
                left[su].g += grad[static_cast<std::size_t>(r)];
                left[su].h += hess[static_cast<std::size_t>(r)];
                last[su] = v;
                seen[su] = 1;
            }
        }
        const std::size_t first_new = tree.nodes.size();
        for (std::size_t s = 0; s < m; ++s) {
            if (best[s].feature < 0) continue;
            const int nd = frontier[s];
            const int depth = tree.nodes[static_cast<std::size_t>(nd)].depth + 1;
            const int l = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, depth});
            tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 0.0, depth});
            TreeNode& parent = tree.nodes[static_cast<std::size_t>(nd)];
            parent.feature = best[s].feature;
            parent.threshold = best[s].threshold;
            parent.left = l;
            parent.right = l + 1;
            tree.max_depth_reached = std::max(tree.max_depth_reached, depth);
            if (feature_gain) (*feature_gain)[static_cast<std::size_t>(best[s].feature)] += best[s].score;
        }
        if (tree.nodes.size() == first_new) break;
        std::vector<Stats> new_stats(tree.nodes.size() - first_new);
        for (Eigen::Index r = 0; r < n; ++r) {
            const int nd = node_of[static_cast<std::size_t>(r)];
            if (nd < 0) continue;
            const int s = slot_of[static_cast<std::size_t>(nd)];
            if (s < 0 || best[static_cast<std::size_t>(s)].feature < 0) {
                node_of[static_cast<std::size_t>(r)] = -1;
                continue;
            }
            const TreeNode& parent = tree.nodes[static_cast<std::size_t>(nd)];
            const int child = x(r, parent.feature) <= parent.threshold ? parent.left : parent.right;
            node_of[static_cast<std::size_t>(r)] = child;
            Stats& cs = new_stats[static_cast<std::size_t>(child) - first_new];
            cs.g += grad[static_cast<std::size_t>(r)];
            cs.h += hess[static_cast<std::size_t>(r)];
        }
        std::vector<int> next_frontier;
        std::vector<Stats> next_totals;
        for (std::size_t c = 0; c < new_stats.size(); ++c) {
            const int id = static_cast<int>(first_new + c);
            TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
            node.value = leaf(new_stats[c]);
            if (node.depth < params.max_depth && new_stats[c].h >= 2.0 * params.min_child_weight) {
                next_frontier.push_back(id);
                next_totals.push_back(new_stats[c]);
            }
        }
        std::vector<char> open(tree.nodes.size(), 0);
        for (int id : next_frontier) open[static_cast<std::size_t>(id)] = 1;
        for (auto& nd : node_of)
            if (nd >= 0 && !open[static_cast<std::size_t>(nd)]) nd = -1;
        frontier = std::move(next_frontier);
        totals = std::move(next_totals);
    }
    return tree;
}

}  // namespace ciams::learners
