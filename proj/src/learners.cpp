#include "ciams/learners.hpp"

#include "ciams/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

namespace ciams::learners {

namespace {

constexpr double kTieTolerance = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int tree_label(double positive_fraction) { return positive_fraction > 0.5 ? 1 : -1; }

std::size_t sz(Eigen::Index i) { return static_cast<std::size_t>(i); }

bool single_class(const Labels& y) {
    return std::all_of(y.begin(), y.end(), [&](int v) { return v == y.front(); });
}

// One CV split: training and held-out rows.
struct Fold {
    Matrix x_train, x_test;
    Labels y_train, y_test;
};

std::vector<Fold> make_folds(const Matrix& x, const Labels& y, int folds, std::uint64_t seed) {
    const std::vector<int> fold_of = stratified_folds(y, folds, seed);
    const int k = effective_folds(y, folds);
    std::vector<Fold> out(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        std::vector<int> train, test;
        for (std::size_t r = 0; r < y.size(); ++r) (fold_of[r] == f ? test : train).push_back(static_cast<int>(r));
        Fold& fold = out[static_cast<std::size_t>(f)];
        fold.x_train = select_rows(x, train);
        fold.x_test = select_rows(x, test);
        fold.y_train = select_labels(y, train);
        fold.y_test = select_labels(y, test);
    }
    return out;
}

// Per-depth labels of a tree for one row: entry d is the prediction with depth limit d.
void path_values(const Tree& tree, const Matrix& x, Eigen::Index row, int max_depth, std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(max_depth) + 1, 0.0);
    int node = 0;
    int d = 0;
    for (; d <= max_depth; ++d) {
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
        out[static_cast<std::size_t>(d)] = nd.value;
        if (nd.feature < 0) break;
        node = x(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    for (++d; d <= max_depth; ++d) out[static_cast<std::size_t>(d)] = out[static_cast<std::size_t>(d) - 1];
}

std::vector<double> bootstrap_weights(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> w(n, 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) w[pick(rng)] += 1.0;
    return w;
}

std::vector<Tree> grow_forest(const Matrix& x, const Labels& y, std::uint64_t seed, int n_trees = 100) {
    const SortedColumns columns(x);
    const int max_features = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
    std::mt19937_64 rng(seed);
    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        const std::vector<double> w = bootstrap_weights(y.size(), rng);
        trees.push_back(grow_classification_tree(columns, y, w, {INT_MAX, max_features, rng()}));
    }
    return trees;
}

Tree grow_pure_tree(const Matrix& x, const Labels& y) {
    const SortedColumns columns(x);
    return grow_classification_tree(columns, y, std::vector<double>(y.size(), 1.0), {});
}

// Mean CV score per depth 0..D for a tree family (single tree or forest).
std::vector<double> depth_curve(const std::vector<Fold>& folds, Metric metric, bool forest, std::uint64_t seed) {
    std::vector<std::vector<double>> per_fold;
    int deepest = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const Fold& fold = folds[f];
        std::vector<Tree> trees;
        if (!single_class(fold.y_train)) {
            if (forest)
                trees = grow_forest(fold.x_train, fold.y_train, derive_seed(seed, f));
            else
                trees.push_back(grow_pure_tree(fold.x_train, fold.y_train));
        }
        int fold_depth = 0;
        for (const auto& t : trees) fold_depth = std::max(fold_depth, t.max_depth_reached);
        deepest = std::max(deepest, fold_depth);
        const auto n_test = fold.x_test.rows();
        // votes[d][row] = trees voting +1 at depth limit d
        std::vector<std::vector<int>> votes(static_cast<std::size_t>(fold_depth) + 1, std::vector<int>(sz(n_test), 0));
        std::vector<double> path;
        for (const auto& t : trees) {
            for (Eigen::Index r = 0; r < n_test; ++r) {
                path_values(t, fold.x_test, r, fold_depth, path);
                for (int d = 0; d <= fold_depth; ++d)
                    if (tree_label(path[static_cast<std::size_t>(d)]) > 0) ++votes[static_cast<std::size_t>(d)][sz(r)];
            }
        }
        std::vector<double> scores(static_cast<std::size_t>(fold_depth) + 1);
        for (int d = 0; d <= fold_depth; ++d) {
            Labels pred(sz(n_test));
            for (Eigen::Index r = 0; r < n_test; ++r) {
                if (trees.empty())
                    pred[sz(r)] = fold.y_train.front();
                else
                    pred[sz(r)] = 2 * votes[static_cast<std::size_t>(d)][sz(r)] > static_cast<int>(trees.size()) ? 1 : -1;
            }
            scores[static_cast<std::size_t>(d)] = score(metric, fold.y_test, pred);
        }
        per_fold.push_back(std::move(scores));
    }
    std::vector<double> curve(static_cast<std::size_t>(deepest) + 1, 0.0);
    for (const auto& s : per_fold)
        for (int d = 0; d <= deepest; ++d)
            curve[static_cast<std::size_t>(d)] += s[std::min(static_cast<std::size_t>(d), s.size() - 1)];
    for (auto& c : curve) c /= static_cast<double>(per_fold.size());
    return curve;
}

// Lowest index wins ties; candidates are listed from lowest to highest capacity.
std::size_t argmax_first(const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best] + kTieTolerance) best = i;
    return best;
}

template <class Fit>
double cv_score(const std::vector<Fold>& folds, Metric metric, Fit&& fit) {
    double total = 0.0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const Fold& fold = folds[f];
        Labels pred;
        if (single_class(fold.y_train)) {
            pred.assign(fold.y_test.size(), fold.y_train.front());
        } else {
            pred = predict_rows(fit(fold, f), fold.x_test);
        }
        total += score(metric, fold.y_test, pred);
    }
    return total / static_cast<double>(folds.size());
}

const std::vector<double> kLogisticStrengths = {1.0, 0.1, 0.01};
const std::vector<double> kLogisticMix = {0.75, 0.5, 0.25};
const std::vector<double> kSvmC = {0.01, 0.1, 1.0, 10.0, 100.0};
const std::vector<int> kBoostingDepths = {1, 2, 4, 8, 16, 32, 64};

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

// log(1 + exp(-m)) without overflow
double log_loss(double margin) { return margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin)); }

}  // namespace

std::string model_class_name(ModelClass c) {
    switch (c) {
        case ModelClass::DecisionTree: return "DecisionTree";
        case ModelClass::RandomForest: return "RandomForest";
        case ModelClass::LogisticRegression: return "LogisticRegression";
        case ModelClass::KNN: return "KNN";
        case ModelClass::XGBoostLike: return "XGBoostLike";
        case ModelClass::SVM: return "SVM";
    }
    return "?";
}

std::optional<ModelClass> parse_model_class(const std::string& name) {
    auto lower = [](std::string s) {
        for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return s;
    };
    const std::string key = lower(name);
    for (ModelClass c : kAllModelClasses)
        if (lower(model_class_name(c)) == key) return c;
    return std::nullopt;
}

double score(Metric metric, const Labels& truth, const Labels& predicted) {
    return metric == Metric::F1 ? stats::f1_score(truth, predicted) : stats::weighted_f1_score(truth, predicted);
}

int effective_folds(const Labels& y, int folds) {
    if (folds < 2) throw ValidationError("folds must be at least 2");
    const auto pos = std::count(y.begin(), y.end(), 1);
    const auto neg = static_cast<std::ptrdiff_t>(y.size()) - pos;
    const auto minority = std::min(pos, neg);
    if (minority < folds) return static_cast<int>(std::max<std::ptrdiff_t>(2, minority));
    return folds;
}

std::vector<int> stratified_folds(const Labels& y, int folds, std::uint64_t seed) {
    const int k = effective_folds(y, folds);
    std::mt19937_64 rng(seed);
    std::vector<int> fold_of(y.size(), 0);
    int offset = 0;
    for (int cls : {1, -1}) {
        std::vector<int> rows;
        for (std::size_t r = 0; r < y.size(); ++r)
            if (y[r] == cls) rows.push_back(static_cast<int>(r));
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t i = 0; i < rows.size(); ++i)
            fold_of[static_cast<std::size_t>(rows[i])] = static_cast<int>((i + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(k));
        // continue the round robin so fold sizes stay balanced overall
        offset = static_cast<int>((rows.size() + static_cast<std::size_t>(offset)) % static_cast<std::size_t>(k));
    }
    return fold_of;
}

// --- prediction -------------------------------------------------------------

double SvmModel::decision(const Matrix& x, Eigen::Index row) const {
    double s = bias;
    for (Eigen::Index i = 0; i < support.rows(); ++i)
        s += dual_coef[i] * std::exp(-gamma * (support.row(i) - x.row(row)).squaredNorm());
    return s;
}

Labels predict_rows(const Model& model, const Matrix& x) {
    const auto n = x.rows();
    Labels out(sz(n));
    std::visit(
        Overloaded{
            [&](const ConstantModel& m) { std::fill(out.begin(), out.end(), m.label); },
            [&](const TreeModel& m) {
                for (Eigen::Index r = 0; r < n; ++r) out[sz(r)] = tree_label(m.tree.evaluate(x, r, m.depth_limit));
            },
            [&](const ForestModel& m) {
                for (Eigen::Index r = 0; r < n; ++r) {
                    int votes = 0;
                    for (const auto& t : m.trees) votes += tree_label(t.evaluate(x, r, m.depth_limit)) > 0 ? 1 : 0;
                    out[sz(r)] = 2 * votes > static_cast<int>(m.trees.size()) ? 1 : -1;
                }
            },
            [&](const LogisticModel& m) {
                const Vector z = x * m.weights;
                for (Eigen::Index r = 0; r < n; ++r) out[sz(r)] = z[r] + m.intercept > 0 ? 1 : -1;
            },
            [&](const KnnModel& m) {
                const auto n_train = m.points.rows();
                const int k = std::min<int>(m.k, static_cast<int>(n_train));
                std::vector<std::pair<double, int>> dist(sz(n_train));
                for (Eigen::Index r = 0; r < n; ++r) {
                    for (Eigen::Index i = 0; i < n_train; ++i)
                        dist[sz(i)] = {(m.points.row(i) - x.row(r)).squaredNorm(), static_cast<int>(i)};
                    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
                    int vote = 0;
                    for (int j = 0; j < k; ++j) vote += m.labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(j)].second)];
                    out[sz(r)] = vote > 0 ? 1 : vote < 0 ? -1 : m.labels[static_cast<std::size_t>(dist.front().second)];
                }
            },
            [&](const BoostedModel& m) {
                for (Eigen::Index r = 0; r < n; ++r) {
                    double margin = m.base_margin;
                    for (const auto& t : m.trees) margin += m.learning_rate * t.evaluate(x, r);
                    out[sz(r)] = margin > 0 ? 1 : -1;
                }
            },
            [&](const SvmModel& m) {
                for (Eigen::Index r = 0; r < n; ++r) out[sz(r)] = m.decision(x, r) > 0 ? 1 : -1;
            },
        },
        model);
    return out;
}

int predict(const TunedClassifier& t, const Eigen::RowVectorXd& x) {
    if (x.size() != t.n_features)
        throw ValidationError("dimension mismatch: expected " + std::to_string(t.n_features) + " features, got " +
                              std::to_string(x.size()));
    const Matrix row = x;
    return predict_rows(t.model, row).front();
}

Labels predict(const TunedClassifier& t, const Matrix& x) {
    if (x.cols() != t.n_features)
        throw ValidationError("dimension mismatch: expected " + std::to_string(t.n_features) + " features, got " +
                              std::to_string(x.cols()));
    return predict_rows(t.model, x);
}

// --- individual learners -----------------------------------------------------

LogisticModel train_logistic(const Matrix& x, const Labels& y, double strength, double l1_ratio,
                             std::vector<double>* objective_trace, int max_epochs) {
    const auto n = x.rows();
    const auto p = x.cols();
    Vector yv(n);
    for (Eigen::Index r = 0; r < n; ++r) yv[r] = y[sz(r)];
    const double l1 = strength * l1_ratio;
    const double l2 = strength * (1.0 - l1_ratio);

    // smooth part: mean log-loss + l2/2 |w|^2
    auto smooth = [&](const Vector& w, double b) {
        const Vector margin = (yv.array() * ((x * w).array() + b)).matrix();
        double s = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) s += log_loss(margin[r]);
        return s / static_cast<double>(n) + 0.5 * l2 * w.squaredNorm();
    };
    auto objective = [&](const Vector& w, double b) { return smooth(w, b) + l1 * w.lpNorm<1>(); };

    Vector w = Vector::Zero(p);
    double b = 0.0;
    double step = 1.0;
    double f_cur = objective(w, b);
    if (objective_trace) objective_trace->push_back(f_cur);
    for (int epoch = 0; epoch < max_epochs; ++epoch) {
        const Vector margin = (yv.array() * ((x * w).array() + b)).matrix();
        Vector coef(n);
        for (Eigen::Index r = 0; r < n; ++r) coef[r] = -yv[r] * sigmoid(-margin[r]) / static_cast<double>(n);
        const Vector gw = x.transpose() * coef + l2 * w;
        const double gb = coef.sum();
        const double s_cur = smooth(w, b);
        Vector w_new;
        double b_new = 0.0;
        // backtracking on the quadratic upper bound
        for (int tries = 0; tries < 60; ++tries) {
            w_new = w - step * gw;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double v = w_new[j];
                w_new[j] = std::copysign(std::max(std::abs(v) - step * l1, 0.0), v);
            }
            b_new = b - step * gb;
            const Vector dw = w_new - w;
            const double db = b_new - b;
            const double bound = s_cur + gw.dot(dw) + gb * db + (dw.squaredNorm() + db * db) / (2.0 * step);
            if (smooth(w_new, b_new) <= bound + 1e-15) break;
            step *= 0.5;
        }
        const double f_new = objective(w_new, b_new);
        if (f_new > f_cur) break;  // numerical floor reached
        const double change = f_cur - f_new;
        w = std::move(w_new);
        b = b_new;
        f_cur = f_new;
        if (objective_trace) objective_trace->push_back(f_cur);
        if (change <= 1e-9 * std::max(1.0, f_cur)) break;
        step *= 1.5;
    }
    return LogisticModel{w, b};
}

double svm_gamma(const Matrix& x) {
    const double count = static_cast<double>(x.size());
    if (count == 0) throw ValidationError("no features");
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / count;
    if (!(var > 0)) return 1.0 / static_cast<double>(x.cols());
    return 1.0 / (static_cast<double>(x.cols()) * var);
}

SvmModel train_svm(const Matrix& x, const Labels& y, double c, double gamma, double tolerance, SmoReport* report) {
    const auto n = x.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
    }
    std::vector<double> yy(sz(n));
    for (Eigen::Index i = 0; i < n; ++i) yy[sz(i)] = y[sz(i)];
    Vector alpha = Vector::Zero(n);
    Vector g = Vector::Constant(n, -1.0);  // gradient of 1/2 a'Qa - e'a
    constexpr double tau = 1e-12;
    auto at_upper = [&](Eigen::Index t) { return alpha[t] >= c; };
    auto at_lower = [&](Eigen::Index t) { return alpha[t] <= 0; };

    const int max_iterations = std::max<int>(50000, static_cast<int>(100 * n));
    int iter = 0;
    bool converged = false;
    double violation = 0.0;
    for (; iter < max_iterations; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (yy[sz(t)] > 0) {
                if (!at_upper(t) && -g[t] >= gmax) gmax = -g[t], i = t;
            } else if (!at_lower(t) && g[t] >= gmax) {
                gmax = g[t], i = t;
            }
        }
        Eigen::Index j = -1;
        double best_obj = std::numeric_limits<double>::infinity();
        for (Eigen::Index t = 0; t < n && i >= 0; ++t) {
            double grad_diff = 0.0;
            if (yy[sz(t)] > 0) {
                if (at_lower(t)) continue;
                gmax2 = std::max(gmax2, g[t]);
                grad_diff = gmax + g[t];
            } else {
                if (at_upper(t)) continue;
                gmax2 = std::max(gmax2, -g[t]);
                grad_diff = gmax - g[t];
            }
            if (grad_diff > 0) {
                double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if (quad <= 0) quad = tau;
                const double obj = -grad_diff * grad_diff / quad;
                if (obj <= best_obj) best_obj = obj, j = t;
            }
        }
        violation = gmax + gmax2;
        if (i < 0 || j < 0 || violation < tolerance) {
            converged = true;
            break;
        }
        const double yi = yy[sz(i)], yj = yy[sz(j)];
        const double old_i = alpha[i], old_j = alpha[j];
        double quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if (quad <= 0) quad = tau;
        if (yi != yj) {
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
            } else if (alpha[i] < 0) {
                alpha[i] = 0, alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
            } else if (alpha[j] > c) {
                alpha[j] = c, alpha[i] = c + diff;
            }
        } else {
            const double delta = (g[i] - g[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
            } else if (alpha[j] < 0) {
                alpha[j] = 0, alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
            } else if (alpha[i] < 0) {
                alpha[i] = 0, alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (Eigen::Index t = 0; t < n; ++t)
            g[t] += yy[sz(t)] * (yi * k(i, t) * di + yj * k(j, t) * dj);
    }

    // bias from free vectors, else midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, free_sum = 0.0;
    int free_count = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = yy[sz(t)] * g[t];
        if (at_upper(t)) {
            if (yy[sz(t)] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (yy[sz(t)] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    const double rho = free_count > 0 ? free_sum / free_count : (ub + lb) / 2.0;

    SvmModel model;
    model.gamma = gamma;
    model.bias = -rho;
    std::vector<int> sv;
    for (Eigen::Index t = 0; t < n; ++t)
        if (alpha[t] > 0) sv.push_back(static_cast<int>(t));
    model.support = select_rows(x, sv);
    model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s)
        model.dual_coef[static_cast<Eigen::Index>(s)] = alpha[sv[s]] * yy[static_cast<std::size_t>(sv[s])];
    if (report) *report = SmoReport{iter, converged, violation, alpha};
    return model;
}

int knn_neighbours(const Labels& y) {
    const auto pos = std::count(y.begin(), y.end(), 1);
    const auto neg = static_cast<std::ptrdiff_t>(y.size()) - pos;
    const auto minority = std::min(pos, neg);
    const auto majority = std::max(pos, neg);
    const int n = static_cast<int>(y.size());
    int k = minority > 0 ? static_cast<int>(std::lround(static_cast<double>(majority) / static_cast<double>(minority))) : 1;
    return std::clamp(k, 1, std::max(1, n - 1));
}

BoostedModel train_boosted_classifier(const Matrix& x, const Labels& y, const BoostingParams& params, int* deepest) {
    const auto n = x.rows();
    const SortedColumns columns(x);
    BoostedModel model;
    model.learning_rate = params.learning_rate;
    std::vector<double> margin(sz(n), model.base_margin), grad(sz(n)), hess(sz(n));
    const std::vector<char> active(sz(n), 1);
    int depth = 0;
    for (int round = 0; round < params.rounds; ++round) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double target = y[sz(r)] > 0 ? 1.0 : 0.0;
            const double prob = sigmoid(margin[sz(r)]);
            grad[sz(r)] = prob - target;
            hess[sz(r)] = std::max(prob * (1.0 - prob), 1e-16);
        }
        Tree t = grow_boosting_tree(columns, grad, hess, active, params.tree);
        depth = std::max(depth, t.max_depth_reached);
        for (Eigen::Index r = 0; r < n; ++r) margin[sz(r)] += params.learning_rate * t.evaluate(x, r);
        model.trees.push_back(std::move(t));
    }
    if (deepest) *deepest = depth;
    return model;
}

// --- fitting and tuning ----------------------------------------------------------

Model fit_model(ModelClass c, const Matrix& x, const Labels& y, const std::map<std::string, double>& hp,
                std::uint64_t seed) {
    if (y.empty()) throw ValidationError("no training rows");
    if (single_class(y)) return ConstantModel{y.front()};
    auto param = [&](const char* name) {
        const auto it = hp.find(name);
        if (it == hp.end()) throw ValidationError(std::string("missing hyperparameter ") + name);
        return it->second;
    };
    switch (c) {
        case ModelClass::DecisionTree:
            return TreeModel{grow_pure_tree(x, y), static_cast<int>(param("max_depth"))};
        case ModelClass::RandomForest:
            return ForestModel{grow_forest(x, y, seed), static_cast<int>(param("max_depth"))};
        case ModelClass::LogisticRegression:
            return train_logistic(x, y, param("strength"), param("l1_ratio"));
        case ModelClass::KNN:
            return KnnModel{x, y, knn_neighbours(y)};
        case ModelClass::XGBoostLike: {
            BoostingParams bp;
            bp.tree.max_depth = static_cast<int>(param("max_depth"));
            return train_boosted_classifier(x, y, bp);
        }
        case ModelClass::SVM:
            return train_svm(x, y, param("C"), param("gamma"));
    }
    throw std::logic_error("unknown model class");
}

TuningResult tune(ModelClass c, const Matrix& x, const Labels& y, std::uint64_t seed, const TuningOptions& options) {
    if (x.cols() == 0) throw ValidationError("no features");
    if (single_class(y)) throw ValidationError("tuning needs both classes");
    const std::vector<Fold> folds = make_folds(x, y, options.folds, derive_seed(seed, 0x666f6c64));
    const std::uint64_t fit_seed = derive_seed(seed, static_cast<std::uint64_t>(index_of(c)) + 1);
    TuningResult result;
    result.model_class = c;
    switch (c) {
        case ModelClass::DecisionTree:
        case ModelClass::RandomForest: {
            const bool forest = c == ModelClass::RandomForest;
            std::vector<double> curve = depth_curve(folds, options.metric, forest, fit_seed);
            // depth 0 is the root-only model; the grid starts at depth 1 unless no split exists at all
            std::size_t best = curve.size() > 1 ? 1 : 0;
            for (std::size_t d = best + 1; d < curve.size(); ++d)
                if (curve[d] > curve[best] + kTieTolerance) best = d;
            result.hyperparameters["max_depth"] = static_cast<double>(best);
            result.cv_score = curve[best];
            break;
        }
        case ModelClass::LogisticRegression: {
            std::vector<double> scores;
            std::vector<std::pair<double, double>> grid;
            for (double s : kLogisticStrengths)
                for (double m : kLogisticMix) {
                    grid.emplace_back(s, m);
                    scores.push_back(cv_score(folds, options.metric, [&](const Fold& f, std::size_t) -> Model {
                        return train_logistic(f.x_train, f.y_train, s, m);
                    }));
                }
            const std::size_t best = argmax_first(scores);
            result.hyperparameters = {{"strength", grid[best].first}, {"l1_ratio", grid[best].second}};
            result.cv_score = scores[best];
            break;
        }
        case ModelClass::KNN: {
            result.cv_score = cv_score(folds, options.metric, [&](const Fold& f, std::size_t) -> Model {
                return KnnModel{f.x_train, f.y_train, knn_neighbours(f.y_train)};
            });
            result.hyperparameters["k"] = knn_neighbours(y);
            break;
        }
        case ModelClass::XGBoostLike: {
            // Once the depth limit stops binding, deeper settings give the same ensemble.
            std::vector<double> fold_scores_sum(kBoostingDepths.size(), 0.0);
            for (const Fold& fold : folds) {
                double last = 0.0;
                bool saturated = false;
                for (std::size_t d = 0; d < kBoostingDepths.size(); ++d) {
                    if (!saturated) {
                        Labels pred;
                        if (single_class(fold.y_train)) {
                            pred.assign(fold.y_test.size(), fold.y_train.front());
                            saturated = true;
                        } else {
                            BoostingParams bp;
                            bp.tree.max_depth = kBoostingDepths[d];
                            int deepest = 0;
                            pred = predict_rows(train_boosted_classifier(fold.x_train, fold.y_train, bp, &deepest), fold.x_test);
                            saturated = deepest < kBoostingDepths[d];
                        }
                        last = score(options.metric, fold.y_test, pred);
                    }
                    fold_scores_sum[d] += last;
                }
            }
            std::vector<double> scores(kBoostingDepths.size());
            for (std::size_t d = 0; d < scores.size(); ++d) scores[d] = fold_scores_sum[d] / static_cast<double>(folds.size());
            const std::size_t best = argmax_first(scores);
            result.hyperparameters["max_depth"] = kBoostingDepths[best];
            result.cv_score = scores[best];
            break;
        }
        case ModelClass::SVM: {
            const double gamma = svm_gamma(x);
            std::vector<double> scores;
            for (double cc : kSvmC)
                scores.push_back(cv_score(folds, options.metric, [&](const Fold& f, std::size_t) -> Model {
                    return train_svm(f.x_train, f.y_train, cc, gamma);
                }));
            const std::size_t best = argmax_first(scores);
            result.hyperparameters = {{"C", kSvmC[best]}, {"gamma", gamma}};
            result.cv_score = scores[best];
            break;
        }
    }
    return result;
}

TunedClassifier fit_tuned(ModelClass c, const data::Dataset& d, int folds, std::uint64_t seed, Metric metric) {
    if (!d.has_both_classes()) throw ValidationError("dataset needs both classes");
    const TuningResult tr = tune(c, d.features, d.labels, seed, {folds, metric});
    TunedClassifier t;
    t.model_class = c;
    t.chosen_hyperparameters = tr.hyperparameters;
    t.cv_f1 = tr.cv_score;
    t.n_features = static_cast<int>(d.cols());
    t.model = fit_model(c, d.features, d.labels, tr.hyperparameters, derive_seed(seed, 0x66696e616c));
    return t;
}

// --- gradient-boosted regression -------------------------------------------------

double predict_regressor(const GBTRegressor& g, const Matrix& x, Eigen::Index row) {
    if (!g.trees.empty() && x.cols() != g.n_features)
        throw ValidationError("dimension mismatch: expected " + std::to_string(g.n_features) + " features, got " +
                              std::to_string(x.cols()));
    double s = g.base_score;
    for (const auto& t : g.trees) s += g.learning_rate * t.evaluate(x, row);
    return s;
}

double predict_regressor(const GBTRegressor& g, const Eigen::RowVectorXd& x) {
    const Matrix m = x;
    return predict_regressor(g, m, 0);
}

GBTRegressor train_gbt(const Matrix& x, const Vector& y, const RegressorParams& params, std::uint64_t seed,
                       std::vector<double>* train_loss, const std::vector<int>* groups) {
    const auto n = x.rows();
    GBTRegressor g;
    g.learning_rate = params.learning_rate;
    g.n_features = static_cast<int>(x.cols());
    g.feature_gain.assign(sz(x.cols()), 0.0);
    if (n == 0) throw ValidationError("no training rows");
    if ((y.array() == y[0]).all()) {
        g.base_score = y[0];
        return g;
    }

    std::vector<char> active(sz(n), 1);
    std::vector<int> validation;
    if (params.validation_fraction > 0 && params.early_stopping_rounds > 0) {
        const auto n_val = static_cast<Eigen::Index>(std::floor(params.validation_fraction * static_cast<double>(n)));
        if (groups) {
            if (static_cast<Eigen::Index>(groups->size()) != n) throw ValidationError("group count does not match rows");
            std::vector<int> ids = *groups;
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
            std::mt19937_64 rng(seed);
            std::shuffle(ids.begin(), ids.end(), rng);
            std::map<int, Eigen::Index> size_of;
            for (int gid : *groups) ++size_of[gid];
            // whole groups until the hold-out reaches its share; at least one group stays in training
            std::set<int> held;
            Eigen::Index taken = 0;
            for (std::size_t i = 0; i + 1 < ids.size() && taken < std::max<Eigen::Index>(n_val, 1); ++i) {
                held.insert(ids[i]);
                taken += size_of[ids[i]];
            }
            for (Eigen::Index r = 0; r < n; ++r)
                if (held.count((*groups)[sz(r)])) validation.push_back(static_cast<int>(r));
            if (n - static_cast<Eigen::Index>(validation.size()) < 2) validation.clear();
        } else if (n_val >= 1 && n - n_val >= 2) {
            std::vector<int> rows(sz(n));
            std::iota(rows.begin(), rows.end(), 0);
            std::mt19937_64 rng(seed);
            std::shuffle(rows.begin(), rows.end(), rng);
            validation.assign(rows.begin(), rows.begin() + n_val);
            std::sort(validation.begin(), validation.end());
        }
        for (int r : validation) active[static_cast<std::size_t>(r)] = 0;
    }
    double base = 0.0;
    Eigen::Index n_active = 0;
    for (Eigen::Index r = 0; r < n; ++r)
        if (active[sz(r)]) base += y[r], ++n_active;
    g.base_score = base / static_cast<double>(n_active);

    const SortedColumns columns(x);
    const BoostingTreeParams tp{params.max_depth, params.lambda, params.min_child_weight};
    std::vector<double> pred(sz(n), g.base_score), grad(sz(n)), hess(sz(n), 1.0);
    std::vector<std::vector<double>> gains;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_count = 0;
    for (int round = 0; round < params.rounds; ++round) {
        for (Eigen::Index r = 0; r < n; ++r) grad[sz(r)] = pred[sz(r)] - y[r];
        std::vector<double> gain(sz(x.cols()), 0.0);
        Tree t = grow_boosting_tree(columns, grad, hess, active, tp, &gain);
        if (t.nodes.size() == 1 && std::abs(t.nodes.front().value) < 1e-15) break;  // nothing left to fit
        for (Eigen::Index r = 0; r < n; ++r) pred[sz(r)] += params.learning_rate * t.evaluate(x, r);
        g.trees.push_back(std::move(t));
        gains.push_back(std::move(gain));
        if (train_loss) {
            double s = 0.0;
            for (Eigen::Index r = 0; r < n; ++r)
                if (active[sz(r)]) s += (pred[sz(r)] - y[r]) * (pred[sz(r)] - y[r]);
            train_loss->push_back(s / static_cast<double>(n_active));
        }
        if (validation.empty()) {
            best_count = g.trees.size();
            continue;
        }
        double v = 0.0;
        for (int r : validation) v += (pred[static_cast<std::size_t>(r)] - y[r]) * (pred[static_cast<std::size_t>(r)] - y[r]);
        if (v < best_val) {
            best_val = v;
            best_count = g.trees.size();
        } else if (static_cast<int>(g.trees.size() - best_count) >= params.early_stopping_rounds) {
            break;
        }
    }
    g.trees.resize(best_count);
    for (std::size_t t = 0; t < best_count; ++t)
        for (std::size_t f = 0; f < g.feature_gain.size(); ++f) g.feature_gain[f] += gains[t][f];
    return g;
}

std::vector<int> group_folds(const std::vector<int>& groups, int folds, std::uint64_t seed) {
    std::vector<int> ids = groups;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::map<int, int> fold_of_group;
    for (std::size_t i = 0; i < ids.size(); ++i) fold_of_group[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    std::vector<int> out(groups.size());
    for (std::size_t r = 0; r < groups.size(); ++r) out[r] = fold_of_group[groups[r]];
    return out;
}

RegressorFit fit_gbt_regressor(const Matrix& x, const Vector& y, const std::vector<int>& depth_grid, int folds,
                               std::uint64_t seed, const std::vector<int>* groups, const RegressorParams& base) {
    const auto n = x.rows();
    if (depth_grid.empty()) throw ValidationError("empty depth grid");
    if (folds < 2 || n < 2 * folds) throw ValidationError("need at least 2 * folds rows");
    RegressorFit fit;
    if ((y.array() == y[0]).all()) {
        RegressorParams p = base;
        p.max_depth = depth_grid.front();
        fit.model = train_gbt(x, y, p, seed);
        fit.best_depth = depth_grid.front();
        fit.constant_target = true;
        fit.out_of_fold.assign(sz(n), y[0]);
        return fit;
    }

    std::vector<int> fold_of;
    int k = folds;
    if (groups) {
        std::vector<int> ids = *groups;
        std::sort(ids.begin(), ids.end());
        k = std::min<int>(folds, static_cast<int>(std::unique(ids.begin(), ids.end()) - ids.begin()));
        if (k < 2) throw ValidationError("grouped CV needs at least two groups");
        fold_of = group_folds(*groups, k, derive_seed(seed, 1));
    } else {
        std::vector<int> rows(sz(n));
        std::iota(rows.begin(), rows.end(), 0);
        std::mt19937_64 rng(derive_seed(seed, 1));
        std::shuffle(rows.begin(), rows.end(), rng);
        fold_of.resize(sz(n));
        for (std::size_t i = 0; i < rows.size(); ++i) fold_of[static_cast<std::size_t>(rows[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
    }

    std::vector<std::vector<double>> oof(depth_grid.size(), std::vector<double>(sz(n), 0.0));
    for (int f = 0; f < k; ++f) {
        std::vector<int> train, test;
        for (Eigen::Index r = 0; r < n; ++r) (fold_of[sz(r)] == f ? test : train).push_back(static_cast<int>(r));
        const Matrix xt = select_rows(x, train);
        const Matrix xs = select_rows(x, test);
        Vector yt(static_cast<Eigen::Index>(train.size()));
        for (std::size_t i = 0; i < train.size(); ++i) yt[static_cast<Eigen::Index>(i)] = y[train[i]];
        std::vector<int> gt;
        if (groups)
            for (int r : train) gt.push_back((*groups)[static_cast<std::size_t>(r)]);
        for (std::size_t d = 0; d < depth_grid.size(); ++d) {
            RegressorParams p = base;
            p.max_depth = depth_grid[d];
            const GBTRegressor g =
                train_gbt(xt, yt, p, derive_seed(seed, 2, static_cast<std::uint64_t>(f)), nullptr, groups ? &gt : nullptr);
            for (std::size_t i = 0; i < test.size(); ++i)
                oof[d][static_cast<std::size_t>(test[i])] = predict_regressor(g, xs, static_cast<Eigen::Index>(i));
        }
    }
    // The intercept-only model competes too: the training-fold mean predicts each held-out fold.
    std::vector<double> intercept_oof(sz(n), 0.0);
    for (int f = 0; f < k; ++f) {
        double sum = 0.0;
        Eigen::Index count = 0;
        for (Eigen::Index r = 0; r < n; ++r)
            if (fold_of[sz(r)] != f) sum += y[r], ++count;
        for (Eigen::Index r = 0; r < n; ++r)
            if (fold_of[sz(r)] == f) intercept_oof[sz(r)] = sum / static_cast<double>(count);
    }
    oof.insert(oof.begin(), std::move(intercept_oof));

    // One-standard-error rule on per-fold MSE: the simplest candidate within one SE of the best wins.
    std::vector<std::vector<double>> fold_mse(oof.size(), std::vector<double>(sz(k), 0.0));
    std::vector<int> fold_size(sz(k), 0);
    for (Eigen::Index r = 0; r < n; ++r) ++fold_size[sz(fold_of[sz(r)])];
    for (std::size_t c = 0; c < oof.size(); ++c)
        for (Eigen::Index r = 0; r < n; ++r) {
            const double e = oof[c][sz(r)] - y[r];
            fold_mse[c][sz(fold_of[sz(r)])] += e * e / fold_size[sz(fold_of[sz(r)])];
        }
    std::vector<double> mean_mse;
    for (const auto& m : fold_mse) mean_mse.push_back(std::accumulate(m.begin(), m.end(), 0.0) / k);
    const auto best = static_cast<std::size_t>(std::min_element(mean_mse.begin(), mean_mse.end()) - mean_mse.begin());
    double var = 0.0;
    for (double v : fold_mse[best]) var += (v - mean_mse[best]) * (v - mean_mse[best]);
    const double se = std::sqrt(var / (k - 1) / k);
    std::size_t chosen = 0;
    while (mean_mse[chosen] > mean_mse[best] + se) ++chosen;

    const std::vector<double> truth(y.data(), y.data() + n);
    fit.cv_r2 = stats::r2_score(truth, oof[chosen]);
    fit.out_of_fold = std::move(oof[chosen]);
    if (chosen == 0) {
        fit.model.base_score = y.mean();
        fit.model.learning_rate = base.learning_rate;
        fit.model.n_features = static_cast<int>(x.cols());
        fit.model.feature_gain.assign(sz(x.cols()), 0.0);
        fit.best_depth = 0;
        return fit;
    }

    RegressorParams p = base;
    p.max_depth = depth_grid[chosen - 1];
    fit.model = train_gbt(x, y, p, derive_seed(seed, 3), nullptr, groups);
    fit.best_depth = depth_grid[chosen - 1];
    return fit;
}

}  // namespace ciams::learners
