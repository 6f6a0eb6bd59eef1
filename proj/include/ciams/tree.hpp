#pragma once

#include "ciams/common.hpp"

#include <climits>
#include <cstdint>
#include <vector>

namespace ciams::learners {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf weight (boosting) or positive-class fraction (classification)
    int depth = 0;
};

/// Binary tree stored as a flat node table; node 0 is the root.
struct Tree {
    std::vector<TreeNode> nodes;
    int max_depth_reached = 0;

    /// Value of the deepest node on the row's path whose depth does not exceed depth_limit.
    [[nodiscard]] double evaluate(const Matrix& x, Eigen::Index row, int depth_limit = INT_MAX) const;
};

/// Feature orderings shared by every tree grown on the same matrix.
class SortedColumns {
public:
    explicit SortedColumns(const Matrix& x);
    [[nodiscard]] const std::vector<int>& order(Eigen::Index feature) const { return order_[static_cast<std::size_t>(feature)]; }
    [[nodiscard]] const Matrix& data() const { return *x_; }

private:
    const Matrix* x_;
    std::vector<std::vector<int>> order_;
};

struct ClassificationTreeParams {
    int max_depth = INT_MAX;
    int max_features = 0;  // features tried per node; 0 means all
    std::uint64_t seed = 0;
};

/// CART with Gini impurity. `weights` are non-negative row multiplicities; zero excludes a row.
Tree grow_classification_tree(const SortedColumns& columns, const Labels& y, const std::vector<double>& weights,
                              const ClassificationTreeParams& params);

struct BoostingTreeParams {
    int max_depth = 6;
    double lambda = 1.0;            // L2 penalty on leaf weights
    double min_child_weight = 1.0;  // minimum hessian sum per child
};

/// Second-order regression tree on gradients/hessians. Leaves hold -G/(H+lambda).
/// Adds each split's loss reduction to feature_gain (sized to the column count).
Tree grow_boosting_tree(const SortedColumns& columns, const std::vector<double>& grad, const std::vector<double>& hess,
                        const std::vector<char>& active, const BoostingTreeParams& params,
                        std::vector<double>* feature_gain = nullptr);

}  // namespace ciams::learners
