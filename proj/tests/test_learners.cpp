#include "ciams/learners.hpp"
#include "ciams/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ciams;
using namespace ciams::learners;

namespace {

struct Problem {
    Matrix x;
    Labels y;
};

// Two Gaussian classes whose means differ by `shift` along every axis.
Problem gaussian_problem(int n_pos, int n_neg, int p, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Problem pr{Matrix(n_pos + n_neg, p), Labels(static_cast<std::size_t>(n_pos + n_neg))};
    for (int i = 0; i < n_pos + n_neg; ++i) {
        const bool pos = i < n_pos;
        pr.y[static_cast<std::size_t>(i)] = pos ? 1 : -1;
        for (int j = 0; j < p; ++j) pr.x(i, j) = g(rng) + (pos ? shift : 0.0);
    }
    return pr;
}

double accuracy(const Labels& a, const Labels& b) {
    int hit = 0;
    for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
    return static_cast<double>(hit) / static_cast<double>(a.size());
}

// Euclidean projection onto {0 <= a <= c, y'a = 0} by bisection on the multiplier.
Vector project(const Vector& v, const Vector& y, double c) {
    auto at = [&](double lambda) { return Vector((v - lambda * y).cwiseMax(0.0).cwiseMin(c)); };
    double lo = -1e6, hi = 1e6;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (y.dot(at(mid)) > 0 ? lo : hi) = mid;
    }
    return at(0.5 * (lo + hi));
}

double dual_objective(const Matrix& q, const Vector& a) { return 0.5 * a.dot(q * a) - a.sum(); }

}  // namespace

TEST_CASE("model class names") {
    for (ModelClass c : kAllModelClasses) CHECK(parse_model_class(model_class_name(c)) == c);
    CHECK(model_class_name(ModelClass::XGBoostLike) == "XGBoostLike");
    CHECK_FALSE(parse_model_class("Perceptron").has_value());
}

TEST_CASE("knn neighbour count follows the class ratio") {
    Labels y{1, -1, -1, -1};
    CHECK(knn_neighbours(y) == 3);
    Labels y2{1, 1, -1, -1, -1, -1, -1};
    CHECK(knn_neighbours(y2) == 3);  // round(5 / 2)
    Labels y3{1, -1};
    CHECK(knn_neighbours(y3) == 1);
}

TEST_CASE("svm gamma uses the variance of the flattened matrix") {
    Matrix x(2, 2);
    x << 0, 0, 0, 0;
    CHECK(svm_gamma(x) == doctest::Approx(0.5));
    Matrix z(2, 2);
    z << -5, 5, 5, -5;  // variance 25 over four cells
    CHECK(svm_gamma(z) == doctest::Approx(1.0 / (2 * 25)));
    Matrix w(1, 5);
    w << 0, 1, 2, 3, 4;  // variance 2
    CHECK(svm_gamma(w) == doctest::Approx(0.1));
}

TEST_CASE("stratified folds keep every class in every fold") {
    Labels y;
    for (int i = 0; i < 7; ++i) y.push_back(1);
    for (int i = 0; i < 23; ++i) y.push_back(-1);
    const auto f = stratified_folds(y, 5, 3);
    for (int k = 0; k < 5; ++k) {
        int pos = 0, tot = 0;
        for (std::size_t r = 0; r < y.size(); ++r)
            if (f[r] == k) ++tot, pos += y[r] == 1;
        CHECK(pos >= 1);
        CHECK(tot >= 5);
    }
    Labels tiny{1, 1, -1, -1, -1, -1};
    CHECK(effective_folds(tiny, 5) == 2);
    CHECK_THROWS_AS(effective_folds(tiny, 1), ValidationError);
}

TEST_CASE("logistic regression objective decreases and meets optimality") {
    const auto pr = gaussian_problem(30, 50, 4, 1.0, 2);
    std::vector<double> trace;
    const double strength = 0.1, l1_ratio = 0.5;
    const auto m = train_logistic(pr.x, pr.y, strength, l1_ratio, &trace, 5000);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);

    // Subgradient conditions of mean log-loss + l2/2 |w|^2 + l1 |w|_1
    const double l1 = strength * l1_ratio, l2 = strength * (1 - l1_ratio);
    const auto n = pr.x.rows();
    Vector gw = Vector::Zero(pr.x.cols());
    double gb = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const double yr = pr.y[static_cast<std::size_t>(r)];
        const double margin = yr * (pr.x.row(r).dot(m.weights) + m.intercept);
        const double coef = -yr / (1 + std::exp(margin)) / static_cast<double>(n);
        gw += coef * pr.x.row(r).transpose();
        gb += coef;
    }
    gw += l2 * m.weights;
    CHECK(std::abs(gb) < 1e-3);
    for (Eigen::Index j = 0; j < gw.size(); ++j) {
        if (m.weights[j] == 0.0)
            CHECK(std::abs(gw[j]) <= l1 + 1e-3);
        else
            CHECK(std::abs(gw[j] + l1 * (m.weights[j] > 0 ? 1 : -1)) < 1e-3);
    }
    const auto strong = train_logistic(pr.x, pr.y, 10.0, 1.0);
    CHECK(strong.weights.isZero());
}

TEST_CASE("svm solves the dual QP") {
    const auto pr = gaussian_problem(12, 18, 2, 1.2, 4);
    const double c = 1.0, gamma = 0.5;
    SmoReport report;
    const auto m = train_svm(pr.x, pr.y, c, gamma, 1e-5, &report);
    CHECK(report.converged);

    const auto n = pr.x.rows();
    Vector y(n);
    Matrix q(n, n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = pr.y[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            q(i, j) = y[i] * y[j] * std::exp(-gamma * (pr.x.row(i) - pr.x.row(j)).squaredNorm());
    Vector a = Vector::Zero(n);
    const double step = 1.0 / q.operatorNorm();
    for (int it = 0; it < 20000; ++it) a = project(a - step * (q * a - Vector::Ones(n)), y, c);

    CHECK(dual_objective(q, report.alpha) == doctest::Approx(dual_objective(q, a)).epsilon(1e-4));
    CHECK(std::abs(report.alpha.dot(y)) < 1e-8);
    CHECK(report.alpha.minCoeff() >= 0.0);
    CHECK(report.alpha.maxCoeff() <= c + 1e-12);

    // Decision values of free support vectors sit on the margin.
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a_i = report.alpha[i];
        if (a_i > 1e-6 && a_i < c - 1e-6) CHECK(y[i] * m.decision(pr.x, i) == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("decision tree fits separable data exactly") {
    const auto pr = gaussian_problem(20, 20, 2, 4.0, 5);
    const auto model = fit_model(ModelClass::DecisionTree, pr.x, pr.y, {{"max_depth", 1000}}, 1);
    CHECK(accuracy(predict_rows(model, pr.x), pr.y) == 1.0);
    const auto stump = fit_model(ModelClass::DecisionTree, pr.x, pr.y, {{"max_depth", 1}}, 1);
    CHECK(std::get<TreeModel>(stump).depth_limit == 1);
}

TEST_CASE("boosted classifier reduces training error") {
    const auto pr = gaussian_problem(40, 60, 3, 1.0, 6);
    BoostingParams p;
    p.rounds = 50;
    p.tree.max_depth = 3;
    const auto m = train_boosted_classifier(pr.x, pr.y, p);
    CHECK(accuracy(predict_rows(m, pr.x), pr.y) > 0.9);
}

TEST_CASE("knn predicts by majority of nearest neighbours") {
    Matrix x(5, 1);
    x << 0, 1, 2, 10, 11;
    const Labels y{1, 1, 1, -1, -1};
    KnnModel m{x, y, 3};
    Matrix q(2, 1);
    q << 0.5, 10.5;
    CHECK(predict_rows(m, q) == Labels{1, -1});
}

TEST_CASE("every class tunes, predicts and beats chance on easy data") {
    const auto pr = gaussian_problem(40, 80, 3, 2.0, 7);
    const auto test = gaussian_problem(40, 80, 3, 2.0, 8);
    for (ModelClass c : kAllModelClasses) {
        const auto t = tune(c, pr.x, pr.y, 3);
        CHECK(t.cv_score > 0.7);
        const auto m = fit_model(c, pr.x, pr.y, t.hyperparameters, 3);
        const auto pred = predict_rows(m, test.x);
        CHECK(stats::f1_score(test.y, pred) > 0.7);
        CHECK(tune(c, pr.x, pr.y, 3).hyperparameters == t.hyperparameters);
    }
}

TEST_CASE("single-class training folds give a constant model") {
    Matrix x(4, 1);
    x << 1, 2, 3, 4;
    const Labels y{-1, -1, -1, -1};
    const auto m = fit_model(ModelClass::SVM, x, y, {{"C", 1}, {"gamma", 1}}, 0);
    CHECK(std::holds_alternative<ConstantModel>(m));
    CHECK(predict_rows(m, x) == y);
}

TEST_CASE("prediction checks the feature count") {
    const auto pr = gaussian_problem(10, 10, 2, 3.0, 9);
    data::Dataset d;
    d.features = pr.x;
    d.labels = pr.y;
    d.feature_names = {"a", "b"};
    const auto t = fit_tuned(ModelClass::LogisticRegression, d, 3, 1);
    CHECK(t.n_features == 2);
    const Matrix wide = Matrix::Zero(2, 3);
    CHECK_THROWS_AS(predict(t, wide), ValidationError);
}

TEST_CASE("one boosting stump equals the exhaustive best split") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 40;
    Matrix x(n, 2);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = u(rng);
        x(i, 1) = u(rng);
        y[i] = (x(i, 1) > 0.6 ? 1.0 : 0.0) + 0.1 * u(rng);
    }
    RegressorParams p;
    p.max_depth = 1;
    p.rounds = 1;
    p.learning_rate = 1.0;
    p.validation_fraction = 0.0;
    p.lambda = 0.0;
    const auto g = train_gbt(x, y, p, 0);

    double best = INFINITY;
    std::vector<double> fitted;
    for (int f = 0; f < 2; ++f)
        for (int s = 0; s < n; ++s) {
            const double thr = x(s, f);
            double sl = 0, sr = 0;
            int nl = 0, nr = 0;
            for (int i = 0; i < n; ++i) (x(i, f) <= thr ? (sl += y[i], ++nl) : (sr += y[i], ++nr));
            if (nl == 0 || nr == 0) continue;
            double sse = 0;
            std::vector<double> fit(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                fit[static_cast<std::size_t>(i)] = x(i, f) <= thr ? sl / nl : sr / nr;
                sse += (y[i] - fit[static_cast<std::size_t>(i)]) * (y[i] - fit[static_cast<std::size_t>(i)]);
            }
            if (sse < best) best = sse, fitted = fit;
        }
    for (int i = 0; i < n; ++i) CHECK(predict_regressor(g, x, i) == doctest::Approx(fitted[static_cast<std::size_t>(i)]).epsilon(1e-9));
    CHECK(g.feature_gain[1] > 0.0);
    CHECK(g.feature_gain[0] == 0.0);
}

TEST_CASE("boosting regressor training loss never increases") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Matrix x(100, 3);
    Vector y(100);
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = g(rng);
        y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1) * x(i, 2) + 0.05 * g(rng);
    }
    RegressorParams p;
    p.validation_fraction = 0.0;
    std::vector<double> loss;
    const auto m = train_gbt(x, y, p, 1, &loss);
    REQUIRE(loss.size() > 10);
    for (std::size_t i = 1; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1] + 1e-12);

    const auto fit = fit_gbt_regressor(x, y, {2, 4}, 5, 3);
    CHECK(fit.cv_r2 > 0.5);
    CHECK((fit.best_depth == 2 || fit.best_depth == 4));
    CHECK(fit.out_of_fold.size() == 100);
}

TEST_CASE("regressor falls back to the intercept when features carry no signal") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix x(120, 4);
    Vector y(120);
    std::vector<int> groups(120);
    for (int i = 0; i < 120; ++i) {
        for (int j = 0; j < 4; ++j) x(i, j) = g(rng);
        y[i] = 0.5 + 0.1 * g(rng);
        groups[static_cast<std::size_t>(i)] = i / 10;
    }
    const auto fit = fit_gbt_regressor(x, y, {2, 4, 6}, 5, 9, &groups);
    CHECK(fit.best_depth == 0);
    CHECK(fit.model.trees.empty());
    CHECK(predict_regressor(fit.model, x, 0) == doctest::Approx(y.mean()).epsilon(1e-12));
    CHECK(fit.cv_r2 <= 0.0);
    for (double f : fit.model.feature_gain) CHECK(f == 0.0);
}

TEST_CASE("constant regression target") {
    Matrix x = Matrix::Random(20, 2);
    Vector y = Vector::Constant(20, 0.7);
    const auto fit = fit_gbt_regressor(x, y, {2, 4, 6}, 5, 0);
    CHECK(fit.constant_target);
    CHECK(fit.model.trees.empty());
    CHECK(predict_regressor(fit.model, x, 3) == 0.7);
}

TEST_CASE("group folds never split a group") {
    std::vector<int> groups{0, 0, 1, 1, 1, 2, 3, 3, 4};
    const auto f = group_folds(groups, 3, 5);
    for (std::size_t i = 0; i < groups.size(); ++i)
        for (std::size_t j = 0; j < groups.size(); ++j)
            if (groups[i] == groups[j]) CHECK(f[i] == f[j]);
}
