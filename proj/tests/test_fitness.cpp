#include "ciams/fitness.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <limits>
#include <set>
#include <sstream>

using namespace ciams;

TEST_CASE("format_double round trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0, 1e6}) {
        const std::string s = fitness::format_double(x);
        CHECK(std::stod(s) == x);
    }
}

TEST_CASE("model fitness lies in [0, 1] and is reproducible") {
    const auto d = fixture::gaussian_dataset("g", 30, 70, 3, 1.5, 1);
    const auto subs = data::draw_subsamples(d, 2, {5, 100, 1});
    const auto a = fitness::model_fitness(subs[0], 9);
    const auto b = fitness::model_fitness(subs[0], 9);
    CHECK(a == b);
    for (double v : a) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    CHECK(*std::max_element(a.begin(), a.end()) > 0.6);
}

TEST_CASE("training table rows, CSV round trip and representative flags") {
    std::vector<data::Dataset> corpus{fixture::gaussian_dataset("alpha", 40, 80, 3, 1.0, 3),
                                      fixture::gaussian_dataset("beta", 60, 60, 3, 0.7, 4)};
    fitness::TableOptions o;
    o.methods = {cluster::Method::KMeans, cluster::Method::Agglomerative};
    o.subsampling.count = 3;
    o.subsampling.size = 40;
    const auto t = fitness::build_training_table(corpus, 5, o);
    CHECK(t.schema.size() == 80);
    CHECK(t.rows.size() == 12);  // 2 datasets x 2 partitions x 3 draws
    CHECK(t.parents() == std::vector<std::string>{"alpha", "beta"});
    std::set<std::string> refs;
    for (const auto& r : t.rows) {
        CHECK(r.features.size() == 80);
        CHECK((r.partition == "train" || r.partition == "test"));
        refs.insert(r.subsample_ref);
    }
    CHECK(refs.size() == t.rows.size());
    CHECK(t.feature_matrix().rows() == 12);
    CHECK(t.target(learners::ModelClass::SVM).size() == 12);

    std::stringstream s;
    fitness::write_table_csv(t, s);
    const auto back = fitness::read_table_csv(s);
    CHECK(back.schema == t.schema);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(back.rows[i].features == t.rows[i].features);
        CHECK(back.rows[i].fitness == t.rows[i].fitness);
        CHECK(back.rows[i].representative == t.rows[i].representative);
        CHECK(back.rows[i].subsample_ref == t.rows[i].subsample_ref);
    }

    const auto again = fitness::build_training_table(corpus, 5, o);
    std::stringstream s2;
    fitness::write_table_csv(again, s2);
    CHECK(s2.str() == s.str());
    CHECK_THROWS_AS(fitness::build_training_table({}, 5, o), ValidationError);
}

TEST_CASE("malformed table csv") {
    std::istringstream empty("");
    CHECK_THROWS_AS(fitness::read_table_csv(empty), ValidationError);
    std::istringstream header("a,b,c\n");
    CHECK_THROWS_AS(fitness::read_table_csv(header), ValidationError);
}

TEST_CASE("parent ids follow first appearance") {
    fitness::TrainingTable t;
    for (const char* p : {"z", "a", "z", "b"}) {
        fitness::TableRow r;
        r.parent = p;
        t.rows.push_back(r);
    }
    CHECK(t.parent_ids() == std::vector<int>{0, 1, 0, 2});
}
