#include "ciams/recommend.hpp"
#include "fixtures.hpp"

#include <doctest.h>

using namespace ciams;
using learners::ModelClass;

TEST_CASE("rank sorts descending and keeps class order on ties") {
    const auto r = recommend::rank({0.5, 0.9, 0.5, 0.7, 0.9, 0.1}, recommend::Mode::SingleShot);
    const std::vector<ModelClass> want{ModelClass::RandomForest, ModelClass::XGBoostLike, ModelClass::KNN,
                                       ModelClass::DecisionTree, ModelClass::LogisticRegression, ModelClass::SVM};
    CHECK(recommend::top_k(r, 6) == want);
    CHECK(recommend::top_k(r, 3).size() == 3);
    CHECK_THROWS_AS(recommend::top_k(r, 0), ValidationError);
    CHECK_THROWS_AS(recommend::top_k(r, 7), ValidationError);
}

TEST_CASE("average is the elementwise mean") {
    const auto a = recommend::average({{0.2, 0.4, 0.6, 0.8, 1.0, 0.0}, {0.4, 0.4, 0.2, 0.0, 1.0, 1.0}});
    const fitness::FitnessVector want{0.3, 0.4, 0.4, 0.4, 1.0, 0.5};
    for (std::size_t i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(want[i]));
}

TEST_CASE("mode names") {
    CHECK(recommend::parse_mode("single-shot") == recommend::Mode::SingleShot);
    CHECK(recommend::parse_mode("subsampled") == recommend::Mode::Subsampled);
    CHECK_THROWS_AS(recommend::parse_mode("both"), ValidationError);
}

TEST_CASE("format is a fixed-width table") {
    auto r = recommend::rank({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, recommend::Mode::Subsampled);
    r.n_subsamples_used = 30;
    r.n_subsamples_rejected = 5;
    const std::string want =
        "rank  class               predicted_f1\n"
        "1     SVM                 0.600000\n"
        "2     XGBoostLike         0.500000\n"
        "mode: subsampled  subsamples used: 30  rejected: 5\n";
    CHECK(recommend::format_recommendation(r, 2) == want);
}

TEST_CASE("constant regressors drive both modes") {
    const auto b = fixture::constant_bundle({0.3, 0.8, 0.5, 0.6, 0.7, 0.4});
    const auto d = fixture::gaussian_dataset("d", 40, 80, 3, 1.0, 2);
    const std::vector<ModelClass> want{ModelClass::RandomForest, ModelClass::XGBoostLike, ModelClass::KNN};
    const auto single = recommend::recommend(b, d, recommend::Mode::SingleShot, 1);
    CHECK(recommend::top_k(single, 3) == want);
    CHECK(single.n_subsamples_used == 1);
    const auto sub = recommend::recommend(b, d, recommend::Mode::Subsampled, 1);
    CHECK(recommend::top_k(sub, 3) == want);
    CHECK(sub.n_subsamples_used + sub.n_subsamples_rejected == data::subsample_count(120, 100));
    CHECK(sub.n_subsamples_used > 0);
    CHECK(sub.ranked[0].second == doctest::Approx(0.8));
}

TEST_CASE("automl tunes only the top three and picks the best cv score") {
    const auto b = fixture::constant_bundle({0.9, 0.1, 0.8, 0.2, 0.7, 0.3});
    const auto d = fixture::gaussian_dataset("d", 40, 60, 3, 2.0, 3);
    const auto u = fixture::gaussian_dataset("u", 10, 10, 3, 2.0, 4);
    recommend::Options o;
    o.subsampling.count = 4;
    const auto r = recommend::automl_fit_predict(b, d, u.features, 5, o);
    const std::vector<ModelClass> top3{ModelClass::DecisionTree, ModelClass::LogisticRegression, ModelClass::XGBoostLike};
    CHECK(r.top3 == top3);
    CHECK(r.evaluated == top3);
    CHECK(std::find(top3.begin(), top3.end(), r.chosen) != top3.end());
    CHECK(r.cv_f1_of_chosen == *std::max_element(r.top3_cv_f1.begin(), r.top3_cv_f1.end()));
    CHECK(r.predictions.size() == 20);
    int hits = 0;
    for (std::size_t i = 0; i < 20; ++i) hits += r.predictions[i] == u.labels[i];
    CHECK(hits >= 15);
    CHECK_THROWS_AS(recommend::automl_fit_predict(b, d, Matrix::Zero(2, 5), 5, o), ValidationError);
}
