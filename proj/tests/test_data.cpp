#include "ciams/data.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace ciams;

namespace {

data::Dataset parse(const std::string& text, data::LoadOptions o = {}) {
    std::istringstream in(text);
    return data::parse_csv(in, "t", o);
}

data::Dataset blob(int n_pos, int n_neg) {
    std::ostringstream s;
    s << "a,b,y\n";
    for (int i = 0; i < n_pos; ++i) s << i << ',' << i * 0.5 << ",yes\n";
    for (int i = 0; i < n_neg; ++i) s << -i << ',' << i * 2.0 << ",no\n";
    return parse(s.str());
}

}  // namespace

TEST_CASE("csv parsing maps the minority class to +1") {
    const auto d = parse("x1,x2,label\n1,2,b\n3,4,a\n5,6,a\n");
    CHECK(d.rows() == 3);
    CHECK(d.cols() == 2);
    CHECK(d.positive_symbol == "b");
    CHECK(d.labels == Labels{1, -1, -1});
    CHECK(d.label_name == "label");
}

TEST_CASE("tie in class counts picks the smaller symbol") {
    const auto d = parse("x,y\n1,z\n2,a\n");
    CHECK(d.positive_symbol == "a");
}

TEST_CASE("csv errors") {
    CHECK_THROWS_WITH_AS(parse(""), "empty file", ValidationError);
    CHECK_THROWS_AS(parse("x,y\n1,a\n2,b\n3,c\n"), ValidationError);
    try {
        parse("x,y\n1,a\n2,b\n3,c\n");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("not binary") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("x,y\n1,a\nfoo,b\n"), ValidationError);
    CHECK_THROWS_AS(parse("x,y\n1,a\n2\n"), ValidationError);
}

TEST_CASE("imputation fills missing cells with the column mean") {
    data::LoadOptions o;
    o.impute = true;
    const auto d = parse("x,y\n1,a\nNA,b\n3,a\n", o);
    CHECK(d.features(1, 0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(parse("x,y\n1,a\nNA,b\n3,a\n"), ValidationError);
}

TEST_CASE("label column by name") {
    data::LoadOptions o;
    o.label_column = "cls";
    const auto d = parse("cls,x\n0,1\n1,2\n1,3\n", o);
    CHECK(d.feature_names == std::vector<std::string>{"x"});
    CHECK(d.positive_symbol == "0");
}

TEST_CASE("standardize uses the population deviation") {
    Matrix x(3, 2);
    x << 1, 5, 2, 5, 3, 5;
    const Matrix z = data::standardize(x);
    CHECK(z(0, 0) == doctest::Approx(-1.2247449).epsilon(1e-6));
    CHECK(z(1, 0) == doctest::Approx(0.0));
    CHECK(z(2, 0) == doctest::Approx(1.2247449).epsilon(1e-6));
    CHECK(z.col(1).isZero());
}

TEST_CASE("subsample size and count formulas") {
    CHECK(data::subsample_size(400) == 100);
    CHECK(data::subsample_size(500) == 100);
    CHECK(data::subsample_size(501) == 300);
    CHECK(data::subsample_size(2000) == 300);
    CHECK(data::subsample_size(5000) == 500);
    // 5 * ceil(5000 / 315) = 80; 5 * ceil(400 / 63) = 35
    CHECK(data::subsample_count(5000, 500) == 80);
    CHECK(data::subsample_count(400, 100) == 35);
    CHECK(data::subsample_count(63, 100) == 5);
}

TEST_CASE("subsamples are stratified, locally standardized and reproducible") {
    const auto d = blob(30, 90);
    const auto a = data::draw_subsamples(d, 11);
    const auto b = data::draw_subsamples(d, 11);
    REQUIRE(a.size() == static_cast<std::size_t>(data::subsample_count(120, 100)));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].row_indices == b[i].row_indices);
        CHECK(a[i].labels.size() == 100);
        const auto pos = std::count(a[i].labels.begin(), a[i].labels.end(), 1);
        CHECK(pos == 25);
        for (Eigen::Index c = 0; c < a[i].features.cols(); ++c) CHECK(std::abs(a[i].features.col(c).mean()) < 1e-9);
        for (std::size_t r = 0; r < a[i].row_indices.size(); ++r)
            CHECK(d.labels[static_cast<std::size_t>(a[i].row_indices[r])] == a[i].labels[r]);
    }
    const auto c = data::draw_subsamples(d, 12);
    CHECK(c[0].row_indices != a[0].row_indices);
}

TEST_CASE("stratified counts keep both classes") {
    CHECK(data::stratified_counts(1, 999, 100) == std::pair{1, 99});
    CHECK(data::stratified_counts(50, 50, 10) == std::pair{5, 5});
}

TEST_CASE("stratified split is disjoint and independent of row order") {
    const auto d = blob(40, 60);
    const auto [train, test] = data::stratified_split(d, {0.7, 3, true});
    CHECK(train.rows() == 70);
    CHECK(test.rows() == 30);
    CHECK(train.count(1) == 28);
    CHECK(test.count(1) == 12);

    std::vector<int> rev(static_cast<std::size_t>(d.rows()));
    for (int i = 0; i < d.rows(); ++i) rev[static_cast<std::size_t>(i)] = d.rows() - 1 - i;
    const auto shuffled = data::subset(d, rev, d.name);
    const auto [train2, test2] = data::stratified_split(shuffled, {0.7, 3, true});
    auto rows_of = [](const data::Dataset& x) {
        std::multiset<std::vector<double>> s;
        for (int r = 0; r < x.rows(); ++r) s.insert({x.features(r, 0), x.features(r, 1), double(x.labels[r])});
        return s;
    };
    CHECK(rows_of(train) == rows_of(train2));
    CHECK(rows_of(test) == rows_of(test2));
}

TEST_CASE("feature csv matches columns by name and drops the label") {
    std::istringstream in("b,y,a\n1,p,2\n3,q,4\n");
    const Matrix x = data::parse_feature_csv(in, {"a", "b"}, "y");
    CHECK(x(0, 0) == 2);
    CHECK(x(0, 1) == 1);
    std::istringstream bad("a,c\n1,2\n");
    CHECK_THROWS_AS(data::parse_feature_csv(bad, {"a", "b"}, "y"), ValidationError);
    std::istringstream empty("a,b\n");
    CHECK(data::parse_feature_csv(empty, {"a", "b"}).rows() == 0);
}

TEST_CASE("column stats carry training statistics to new rows") {
    Matrix x(2, 1);
    x << 0, 2;
    const auto s = data::ColumnStats::fit(x);
    Matrix y(1, 1);
    y << 4;
    CHECK(s.apply(y)(0, 0) == doctest::Approx(3.0));
}
