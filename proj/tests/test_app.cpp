#include "ciams/config.hpp"
#include "ciams/evaluate.hpp"
#include "ciams/service.hpp"
#include "fixtures.hpp"

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace ciams;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ciams_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config parsing") {
    app::Config cfg;
    std::istringstream in(
        "# comment\n"
        "alpha = 3\n"
        "clustering.methods = HDBSCAN, KMeans\n"
        "fitness.metric = weighted_f1\n"
        "recommend.mode = single-shot\n"
        "mapper.depths = 1,3\n"
        "\n");
    app::apply_config(cfg, in);
    CHECK(cfg.alpha == 3);
    CHECK(cfg.methods == std::vector<cluster::Method>{cluster::Method::KMeans, cluster::Method::HDBSCAN});
    CHECK(cfg.metric == learners::Metric::WeightedF1);
    CHECK(cfg.mode == recommend::Mode::SingleShot);
    CHECK(cfg.mapper_depths == std::vector<int>{1, 3});
    CHECK(app::table_options(cfg).subsampling.alpha == 3);

    CHECK_THROWS_AS(app::apply_setting(cfg, "no.such.key", "1"), ValidationError);
    CHECK_THROWS_AS(app::apply_setting(cfg, "alpha", "x"), ValidationError);
    CHECK_THROWS_AS(app::apply_setting(cfg, "clustering.methods", "KMeans,KMeans"), ValidationError);
    CHECK_THROWS_AS(app::apply_setting(cfg, "clustering.methods", "DBSCAN"), ValidationError);
    CHECK_THROWS_AS(app::apply_setting(cfg, "clustering.k", "1"), ValidationError);
    std::istringstream bad("alpha\n");
    CHECK_THROWS_AS(app::apply_config(cfg, bad), ValidationError);
}

TEST_CASE("seed environment override and describe") {
    app::Config cfg;
    setenv("CIAMS_SEED", "77", 1);
    app::apply_environment(cfg);
    unsetenv("CIAMS_SEED");
    CHECK(cfg.seed == 77);
    bool found = false;
    for (const auto& [k, v] : app::describe(cfg))
        if (k == "seed") found = v == "77";
    CHECK(found);
}

TEST_CASE("corpus loading") {
    const auto dir = scratch("corpus");
    CHECK_THROWS_AS(app::load_corpus(dir.string(), {}), ValidationError);
    std::ofstream(dir / "b.csv") << fixture::to_csv(fixture::gaussian_dataset("b", 5, 5, 2, 1.0, 1));
    std::ofstream(dir / "a.csv") << fixture::to_csv(fixture::gaussian_dataset("a", 5, 5, 2, 1.0, 2));
    std::ofstream(dir / "notes.txt") << "ignored";
    const auto corpus = app::load_corpus(dir.string(), {});
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0].name == "a");
    CHECK(corpus[1].name == "b");
}

TEST_CASE("classifier json round trip for every model class") {
    const auto d = fixture::gaussian_dataset("d", 25, 35, 3, 1.5, 3);
    const auto u = fixture::gaussian_dataset("u", 10, 10, 3, 1.5, 4);
    for (auto c : learners::kAllModelClasses) {
        const auto t = learners::fit_tuned(c, d, 3, 1);
        const auto back = app::classifier_from_json(json::parse(app::classifier_to_json(t).dump()));
        CHECK(back.model_class == t.model_class);
        CHECK(back.chosen_hyperparameters == t.chosen_hyperparameters);
        CHECK(learners::predict(back, u.features) == learners::predict(t, u.features));
    }
}

TEST_CASE("service handlers") {
    const auto dir = scratch("service");
    app::Config cfg;
    cfg.alpha = 1;
    app::Service svc(fixture::constant_bundle({0.2, 0.9, 0.4, 0.3, 0.8, 0.7}), cfg, dir.string());

    const auto h = svc.health();
    CHECK(h.status == 200);
    CHECK(json::parse(h.body)["status"] == "ok");

    const auto d = fixture::gaussian_dataset("d", 30, 50, 3, 2.0, 5);
    const auto r = svc.recommend(fixture::to_csv(d), std::string("single-shot"), 3);
    REQUIRE(r.status == 200);
    const auto rj = json::parse(r.body);
    CHECK(rj["ranked"][0]["class"] == "RandomForest");
    CHECK(rj["mode"] == "single-shot");
    CHECK(rj["table"].get<std::string>().find("1     RandomForest") != std::string::npos);

    CHECK(svc.recommend("x,y\n1,a\n", std::nullopt, 6).status == 400);
    CHECK(svc.recommend(fixture::to_csv(d), std::string("sideways"), 6).status == 400);
    CHECK(svc.recommend(fixture::to_csv(d), std::nullopt, 9).status == 400);

    const auto f = svc.fit(fixture::to_csv(d));
    REQUIRE(f.status == 200);
    const auto fj = json::parse(f.body);
    const std::string id = fj["session"];
    CHECK(id.size() == 32);
    CHECK(fj["top3"] == json::array({"RandomForest", "XGBoostLike", "SVM"}));
    CHECK(fs::exists(dir / (id + ".json")));

    const auto u = fixture::gaussian_dataset("u", 5, 5, 3, 2.0, 6);
    const auto p = svc.predict(id, fixture::to_csv(u, true));
    REQUIRE(p.status == 200);
    const auto preds = json::parse(p.body)["predictions"];
    CHECK(preds.size() == 10);
    for (const auto& v : preds) CHECK((v == "yes" || v == "no"));
    CHECK(svc.predict(id, fixture::to_csv(u, false)).body == p.body);

    CHECK(svc.predict("0123456789abcdef0123456789abcdef", fixture::to_csv(u)).status == 404);
    CHECK(svc.predict("../../etc/passwd", fixture::to_csv(u)).status == 404);
    CHECK(svc.predict(id, "f0,zz\n1,2\n").status == 400);
}

TEST_CASE("http routes default to three rows and accept large form-encoded bodies") {
    const auto dir = scratch("http");
    app::Config cfg;
    cfg.alpha = 1;
    app::Service svc(fixture::constant_bundle({0.2, 0.9, 0.4, 0.3, 0.8, 0.7}), cfg, dir.string());
    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string body = fixture::to_csv(fixture::gaussian_dataset("d", 300, 400, 3, 2.0, 5));
    REQUIRE(body.size() > 8192);
    httplib::Client client("127.0.0.1", port);
    const auto r = client.Post("/recommend?mode=single-shot", body, "application/x-www-form-urlencoded");
    const auto bad = client.Post("/recommend?top=x", body, "text/csv");
    const auto missing = client.Post("/predict", body, "text/csv");
    server.stop();
    worker.join();

    REQUIRE(r);
    REQUIRE(r->status == 200);
    const auto j = json::parse(r->body);
    CHECK(j["ranked"].size() == 6);
    const auto table = j["table"].get<std::string>();
    CHECK(table.find("3     ") != std::string::npos);
    CHECK(table.find("4     ") == std::string::npos);
    REQUIRE(bad);
    CHECK(bad->status == 400);
    REQUIRE(missing);
    CHECK(missing->status == 400);
}

TEST_CASE("expired sessions are evicted") {
    const auto dir = scratch("ttl");
    app::SessionStore store(dir.string(), -1);
    app::Session s;
    s.model.model = learners::ConstantModel{1};
    const auto id = store.put(s);
    CHECK(fs::exists(dir / (id + ".json")));
    CHECK_FALSE(store.get(id).has_value());
    store.evict_expired();
    CHECK_FALSE(fs::exists(dir / (id + ".json")));
}

TEST_CASE("small evaluation is well formed and deterministic") {
    std::vector<data::Dataset> corpus;
    for (int i = 0; i < 4; ++i)
        corpus.push_back(fixture::gaussian_dataset("ds" + std::to_string(i), 25, 35, 3, 0.5 + 0.4 * i,
                                                   static_cast<std::uint64_t>(10 + i)));
    app::Config cfg;
    cfg.alpha = 2;
    cfg.methods = {cluster::Method::KMeans};
    cfg.folds = 4;
    cfg.repeats = 1;
    cfg.mapper_folds = 3;
    cfg.mapper_depths = {2};
    const auto a = app::evaluate_corpus(corpus, cfg);
    CHECK(a.held_out.size() == 4);
    CHECK(a.top1_in_top3_recall >= 0.0);
    CHECK(a.top1_in_top3_recall <= 1.0);
    for (const auto& row : a.rank_confusion) CHECK(row[0] + row[1] + row[2] <= 4);
    int hits = 0;
    for (const auto& h : a.held_out) {
        hits += h.top1_in_top3;
        CHECK(h.true_top3.size() == 3);
        const auto best = std::max_element(h.true_fitness.begin(), h.true_fitness.end()) - h.true_fitness.begin();
        CHECK(learners::index_of(h.true_top3[0]) == best);
    }
    CHECK(a.top1_in_top3_recall == doctest::Approx(hits / 4.0));
    CHECK(app::report_json(a) == app::report_json(app::evaluate_corpus(corpus, cfg)));
    const auto j = json::parse(app::report_json(a));
    CHECK(j.contains("rank_confusion"));

    // The same table round-tripped through CSV evaluates to the same report.
    std::stringstream csv;
    fitness::write_table_csv(fitness::build_training_table(corpus, cfg.seed, app::table_options(cfg)), csv);
    CHECK(app::report_json(app::evaluate_table(fitness::read_table_csv(csv), cfg)) == app::report_json(a));
    cfg.folds = 5;
    CHECK_THROWS_AS(app::evaluate_corpus(corpus, cfg), ValidationError);
}
