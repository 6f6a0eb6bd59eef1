#pragma once

#include "ciams/common.hpp"
#include "ciams/data.hpp"
#include "ciams/tree.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ciams::learners {

enum class ModelClass { DecisionTree, RandomForest, LogisticRegression, KNN, XGBoostLike, SVM };

inline constexpr int kModelClassCount = 6;
inline constexpr std::array<ModelClass, kModelClassCount> kAllModelClasses = {
    ModelClass::DecisionTree, ModelClass::RandomForest, ModelClass::LogisticRegression,
    ModelClass::KNN,          ModelClass::XGBoostLike,  ModelClass::SVM};

std::string model_class_name(ModelClass c);
std::optional<ModelClass> parse_model_class(const std::string& name);
inline int index_of(ModelClass c) { return static_cast<int>(c); }

enum class Metric { F1, WeightedF1 };

double score(Metric metric, const Labels& truth, const Labels& predicted);

// --- fitted models --------------------------------------------------------

struct ConstantModel {
    int label = -1;
};

struct TreeModel {
    Tree tree;
    int depth_limit = INT_MAX;
};

struct ForestModel {
    std::vector<Tree> trees;
    int depth_limit = INT_MAX;
};

struct LogisticModel {
    Vector weights;
    double intercept = 0.0;
};

struct KnnModel {
    Matrix points;
    Labels labels;
    int k = 1;
};

struct BoostedModel {
    std::vector<Tree> trees;
    double learning_rate = 0.3;
    double base_margin = 0.0;
};

struct SvmModel {
    Matrix support;     // support vectors
    Vector dual_coef;   // alpha_i * y_i
    double bias = 0.0;
    double gamma = 1.0;

    [[nodiscard]] double decision(const Matrix& x, Eigen::Index row) const;
};

using Model = std::variant<ConstantModel, TreeModel, ForestModel, LogisticModel, KnnModel, BoostedModel, SvmModel>;

/// Predicts every row of x.
Labels predict_rows(const Model& model, const Matrix& x);

struct TunedClassifier {
    ModelClass model_class = ModelClass::DecisionTree;
    Model model;
    std::map<std::string, double> chosen_hyperparameters;
    double cv_f1 = 0.0;
    int n_features = 0;
};

/// Label in {-1, +1} for one row; throws ValidationError on dimension mismatch.
int predict(const TunedClassifier& t, const Eigen::RowVectorXd& x);
Labels predict(const TunedClassifier& t, const Matrix& x);

// --- tuning ---------------------------------------------------------------

struct TuningResult {
    ModelClass model_class = ModelClass::DecisionTree;
    std::map<std::string, double> hyperparameters;
    double cv_score = 0.0;
};

struct TuningOptions {
    int folds = 5;
    Metric metric = Metric::F1;
};

/// Grid search by stratified k-fold CV; ties go to the lower-capacity setting.
TuningResult tune(ModelClass c, const Matrix& x, const Labels& y, std::uint64_t seed, const TuningOptions& options = {});

/// tune() followed by a refit on all rows with the winning hyperparameters.
TunedClassifier fit_tuned(ModelClass c, const data::Dataset& d, int folds, std::uint64_t seed,
                          Metric metric = Metric::F1);

/// Fits one configuration (hyperparameters as produced by tune()).
Model fit_model(ModelClass c, const Matrix& x, const Labels& y, const std::map<std::string, double>& hyperparameters,
                std::uint64_t seed);

/// Stratified fold id per row. Folds shrink to the minority count (at least 2).
std::vector<int> stratified_folds(const Labels& y, int folds, std::uint64_t seed);
int effective_folds(const Labels& y, int folds);

// --- individual learners (exposed for testing) ------------------------------

/// Elastic-net logistic regression by proximal gradient with backtracking.
/// Objective: mean log-loss + strength * (l1_ratio |w|_1 + (1 - l1_ratio) / 2 |w|^2).
LogisticModel train_logistic(const Matrix& x, const Labels& y, double strength, double l1_ratio,
                             std::vector<double>* objective_trace = nullptr, int max_epochs = 500);

struct SmoReport {
    int iterations = 0;
    bool converged = false;
    double max_kkt_violation = 0.0;
    Vector alpha;
};

/// C-SVM with RBF kernel, SMO with second-order working-set selection.
SvmModel train_svm(const Matrix& x, const Labels& y, double c, double gamma, double tolerance = 1e-3,
                   SmoReport* report = nullptr);

/// gamma = 1 / (p * var(flattened x)).
double svm_gamma(const Matrix& x);

/// K = round(majority / minority) clamped to [1, n - 1].
int knn_neighbours(const Labels& y);

struct BoostingParams {
    int rounds = 100;
    double learning_rate = 0.3;
    BoostingTreeParams tree{6, 1.0, 1.0};
};

/// Logistic-loss second-order gradient boosting.
BoostedModel train_boosted_classifier(const Matrix& x, const Labels& y, const BoostingParams& params,
                                      int* deepest = nullptr);

// --- gradient-boosted regression ----------------------------------------------

struct GBTRegressor {
    std::vector<Tree> trees;
    double learning_rate = 0.1;
    double base_score = 0.0;
    int n_features = 0;
    std::vector<double> feature_gain;  // summed split gain per input feature
};

double predict_regressor(const GBTRegressor& g, const Eigen::RowVectorXd& x);
double predict_regressor(const GBTRegressor& g, const Matrix& x, Eigen::Index row);

struct RegressorParams {
    int max_depth = 3;
    int rounds = 200;
    double learning_rate = 0.1;
    int early_stopping_rounds = 20;
    double validation_fraction = 0.2;  // inner hold-out used for early stopping; 0 disables
    double lambda = 0.0;
    double min_child_weight = 1.0;
};

/// Squared-error boosting. `train_loss` receives the mean squared error after each round.
/// With `groups`, the early-stopping hold-out takes whole groups so near-duplicate rows never straddle it.
GBTRegressor train_gbt(const Matrix& x, const Vector& y, const RegressorParams& params, std::uint64_t seed,
                       std::vector<double>* train_loss = nullptr, const std::vector<int>* groups = nullptr);

struct RegressorFit {
    GBTRegressor model;
    int best_depth = 0;  // 0 when the intercept-only model wins the cross-validation
    double cv_r2 = 0.0;
    bool constant_target = false;
    std::vector<double> out_of_fold;  // CV predictions at the chosen depth
};

/// Candidates are the intercept-only model, then `depth_grid` in order, from simplest to richest.
/// The simplest one whose CV MSE is within one standard error of the best is refit on all rows.
/// `groups`, when given, keeps each group in one fold.
RegressorFit fit_gbt_regressor(const Matrix& x, const Vector& y, const std::vector<int>& depth_grid, int folds,
                               std::uint64_t seed, const std::vector<int>* groups = nullptr,
                               const RegressorParams& base = {});

/// Fold id per row such that no group spans two folds.
std::vector<int> group_folds(const std::vector<int>& groups, int folds, std::uint64_t seed);

}  // namespace ciams::learners
