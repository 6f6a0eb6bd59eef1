#include "ciams/service.hpp"

#include "ciams/recommend.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace ciams::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json tree_to_json(const learners::Tree& t) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.depth});
    return {{"max_depth_reached", t.max_depth_reached}, {"nodes", nodes}};
}

learners::Tree tree_from_json(const json& j) {
    learners::Tree t;
    t.max_depth_reached = j.at("max_depth_reached").get<int>();
    for (const auto& n : j.at("nodes")) {
        learners::TreeNode node;
        node.feature = n.at(0).get<int>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int>();
        node.right = n.at(3).get<int>();
        node.value = n.at(4).get<double>();
        node.depth = n.at(5).get<int>();
        t.nodes.push_back(node);
    }
    if (t.nodes.empty()) throw ValidationError("corrupt session: empty tree");
    return t;
}

json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vector_to_json(m.row(r).transpose()));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != m.rows()) throw ValidationError("corrupt session matrix");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const Vector row = vector_from_json(data.at(static_cast<std::size_t>(r)));
        if (row.size() != m.cols()) throw ValidationError("corrupt session matrix");
        m.row(r) = row.transpose();
    }
    return m;
}

json model_to_json(const learners::Model& model) {
    using namespace learners;
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, ConstantModel>) {
                return {{"kind", "constant"}, {"label", m.label}};
            } else if constexpr (std::is_same_v<T, TreeModel>) {
                return {{"kind", "tree"}, {"depth_limit", m.depth_limit}, {"tree", tree_to_json(m.tree)}};
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"kind", "forest"}, {"depth_limit", m.depth_limit}, {"trees", trees}};
            } else if constexpr (std::is_same_v<T, LogisticModel>) {
                return {{"kind", "logistic"}, {"weights", vector_to_json(m.weights)}, {"intercept", m.intercept}};
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                return {{"kind", "knn"}, {"k", m.k}, {"points", matrix_to_json(m.points)}, {"labels", m.labels}};
            } else if constexpr (std::is_same_v<T, BoostedModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
                return {{"kind", "boosted"},
                        {"learning_rate", m.learning_rate},
                        {"base_margin", m.base_margin},
                        {"trees", trees}};
            } else {
                return {{"kind", "svm"},
                        {"support", matrix_to_json(m.support)},
                        {"dual_coef", vector_to_json(m.dual_coef)},
                        {"bias", m.bias},
                        {"gamma", m.gamma}};
            }
        },
        model);
}

learners::Model model_from_json(const json& j) {
    using namespace learners;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "constant") return ConstantModel{j.at("label").get<int>()};
    if (kind == "tree") return TreeModel{tree_from_json(j.at("tree")), j.at("depth_limit").get<int>()};
    if (kind == "forest") {
        ForestModel m;
        m.depth_limit = j.at("depth_limit").get<int>();
        for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
        return m;
    }
    if (kind == "logistic") return LogisticModel{vector_from_json(j.at("weights")), j.at("intercept").get<double>()};
    if (kind == "knn") return KnnModel{matrix_from_json(j.at("points")), j.at("labels").get<Labels>(), j.at("k").get<int>()};
    if (kind == "boosted") {
        BoostedModel m;
        m.learning_rate = j.at("learning_rate").get<double>();
        m.base_margin = j.at("base_margin").get<double>();
        for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
        return m;
    }
    if (kind == "svm") {
        SvmModel m;
        m.support = matrix_from_json(j.at("support"));
        m.dual_coef = vector_from_json(j.at("dual_coef"));
        m.bias = j.at("bias").get<double>();
        m.gamma = j.at("gamma").get<double>();
        return m;
    }
    throw ValidationError("unknown model kind '" + kind + "'");
}

std::int64_t now_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

std::string new_session_id() {
    std::random_device rd;
    std::ostringstream ss;
    for (int i = 0; i < 4; ++i) {
        char buf[9];
        std::snprintf(buf, sizeof buf, "%08x", rd());
        ss << buf;
    }
    return ss.str();
}

bool valid_id(const std::string& id) {
    return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; });
}

Reply error_reply(int status, const std::string& message) { return {status, json{{"error", message}}.dump() + "\n"}; }

data::Dataset parse_body(const std::string& csv, const Config& cfg) {
    std::istringstream in(csv);
    return data::parse_csv(in, "request", load_options(cfg));
}

template <class F>
Reply guarded(F&& f) {
    try {
        return f();
    } catch (const ValidationError& e) {
        return error_reply(400, e.what());
    } catch (const std::exception& e) {
        spdlog::error("request failed: {}", e.what());
        return error_reply(500, e.what());
    }
}

}  // namespace

json classifier_to_json(const learners::TunedClassifier& t) {
    return {{"model_class", learners::model_class_name(t.model_class)},
            {"hyperparameters", t.chosen_hyperparameters},
            {"cv_f1", t.cv_f1},
            {"n_features", t.n_features},
            {"model", model_to_json(t.model)}};
}

learners::TunedClassifier classifier_from_json(const json& j) {
    learners::TunedClassifier t;
    const auto name = j.at("model_class").get<std::string>();
    const auto c = learners::parse_model_class(name);
    if (!c) throw ValidationError("unknown model class '" + name + "'");
    t.model_class = *c;
    t.chosen_hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
    t.cv_f1 = j.at("cv_f1").get<double>();
    t.n_features = j.at("n_features").get<int>();
    t.model = model_from_json(j.at("model"));
    return t;
}

SessionStore::SessionStore(std::string dir, int ttl_seconds) : dir_(std::move(dir)), ttl_(ttl_seconds) {
    fs::create_directories(dir_);
}

std::string SessionStore::path_of(const std::string& id) const { return (fs::path(dir_) / (id + ".json")).string(); }

std::string SessionStore::put(Session s) {
    s.id = new_session_id();
    s.created = now_seconds();
    json top3 = json::array();
    for (auto c : s.top3) top3.push_back(learners::model_class_name(c));
    const json j = {{"id", s.id},
                    {"created", s.created},
                    {"classifier", classifier_to_json(s.model)},
                    {"column_mean", vector_to_json(s.column_stats.mean)},
                    {"column_scale", vector_to_json(s.column_stats.scale)},
                    {"feature_names", s.feature_names},
                    {"label_name", s.label_name},
                    {"positive_symbol", s.positive_symbol},
                    {"negative_symbol", s.negative_symbol},
                    {"top3", top3}};
    const std::lock_guard lock(mutex_);
    const std::string tmp = path_of(s.id) + ".tmp";
    {
        std::ofstream out(tmp);
        out << j.dump();
        if (!out) throw std::runtime_error("cannot write session file");
    }
    fs::rename(tmp, path_of(s.id));
    return s.id;
}

std::optional<Session> SessionStore::get(const std::string& id) {
    if (!valid_id(id)) return std::nullopt;
    const std::lock_guard lock(mutex_);
    std::ifstream in(path_of(id));
    if (!in) return std::nullopt;
    const json j = json::parse(in);
    Session s;
    s.id = id;
    s.created = j.at("created").get<std::int64_t>();
    if (now_seconds() - s.created > ttl_) return std::nullopt;
    s.model = classifier_from_json(j.at("classifier"));
    s.column_stats.mean = vector_from_json(j.at("column_mean"));
    s.column_stats.scale = vector_from_json(j.at("column_scale"));
    s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    s.label_name = j.at("label_name").get<std::string>();
    s.positive_symbol = j.at("positive_symbol").get<std::string>();
    s.negative_symbol = j.at("negative_symbol").get<std::string>();
    for (const auto& name : j.at("top3")) s.top3.push_back(*learners::parse_model_class(name.get<std::string>()));
    return s;
}

void SessionStore::evict_expired() {
    const std::lock_guard lock(mutex_);
    const auto now = now_seconds();
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir_, ec)) {
        if (e.path().extension() != ".json") continue;
        try {
            std::ifstream in(e.path());
            const json j = json::parse(in);
            if (now - j.at("created").get<std::int64_t>() > ttl_) fs::remove(e.path(), ec);
        } catch (const std::exception&) {
            spdlog::warn("removing unreadable session file {}", e.path().string());
            fs::remove(e.path(), ec);
        }
    }
}

std::string recommendation_text(const mapper::MapperBundle& bundle, const data::Dataset& d, const Config& cfg, int top) {
    const auto rec = recommend::recommend(bundle, d, cfg.mode, cfg.seed, recommend_options(cfg));
    return recommend::format_recommendation(rec, top);
}

Service::Service(mapper::MapperBundle bundle, Config cfg, std::string session_dir)
    : bundle_(std::move(bundle)), cfg_(std::move(cfg)), sessions_(std::move(session_dir), cfg_.ttl_seconds) {}

Reply Service::health() const {
    return {200, json{{"status", "ok"},
                      {"model_version", bundle_.version},
                      {"schema_size", bundle_.schema.size()}}
                     .dump() +
                     "\n"};
}

Reply Service::recommend(const std::string& csv, const std::optional<std::string>& mode, int top) const {
    return guarded([&] {
        Config cfg = cfg_;
        if (mode) cfg.mode = recommend::parse_mode(*mode);
        if (top < 1 || top > learners::kModelClassCount) throw ValidationError("top must be in [1, 6]");
        const data::Dataset d = parse_body(csv, cfg);
        const auto rec = recommend::recommend(bundle_, d, cfg.mode, cfg.seed, recommend_options(cfg));
        json ranked = json::array();
        for (const auto& [c, v] : rec.ranked) ranked.push_back({{"class", learners::model_class_name(c)}, {"predicted_f1", v}});
        const json out = {{"mode", recommend::mode_name(rec.mode)},
                          {"ranked", ranked},
                          {"n_subsamples_used", rec.n_subsamples_used},
                          {"n_subsamples_rejected", rec.n_subsamples_rejected},
                          {"table", recommend::format_recommendation(rec, top)}};
        return Reply{200, out.dump() + "\n"};
    });
}

Reply Service::fit(const std::string& csv) {
    return guarded([&] {
        sessions_.evict_expired();
        const data::Dataset d = parse_body(csv, cfg_);
        const Matrix none(0, d.features.cols());
        auto result = recommend::automl_fit_predict(bundle_, d, none, cfg_.seed, recommend_options(cfg_));
        Session s;
        s.model = result.model;
        s.column_stats = result.column_stats;
        s.feature_names = d.feature_names;
        s.label_name = d.label_name;
        s.positive_symbol = d.positive_symbol;
        s.negative_symbol = d.negative_symbol;
        s.top3 = result.top3;
        const std::string id = sessions_.put(std::move(s));
        json top3 = json::array();
        for (auto c : result.top3) top3.push_back(learners::model_class_name(c));
        const json out = {{"session", id},
                          {"chosen", learners::model_class_name(result.chosen)},
                          {"top3", top3},
                          {"top3_cv_f1", result.top3_cv_f1},
                          {"cv_f1", result.cv_f1_of_chosen}};
        return Reply{200, out.dump() + "\n"};
    });
}

Reply Service::predict(const std::string& session_id, const std::string& csv) {
    return guarded([&] {
        sessions_.evict_expired();
        const auto s = sessions_.get(session_id);
        if (!s) return error_reply(404, "unknown session '" + session_id + "'");
        std::istringstream in(csv);
        const Matrix x = data::parse_feature_csv(in, s->feature_names, s->label_name);
        Labels labels;
        if (x.rows() > 0) labels = learners::predict(s->model, s->column_stats.apply(x));
        json preds = json::array();
        for (int l : labels) preds.push_back(l > 0 ? s->positive_symbol : s->negative_symbol);
        const json out = {{"session", s->id},
                          {"model_class", learners::model_class_name(s->model.model_class)},
                          {"predictions", preds}};
        return Reply{200, out.dump() + "\n"};
    });
}

void Service::mount(httplib::Server& server) {
    server.set_payload_max_length(cfg_.max_body_bytes);
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
    server.Post("/recommend", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> mode;
        if (req.has_param("mode")) mode = req.get_param_value("mode");
        int top = 3;  // same default as the CLI
        if (req.has_param("top")) {
            try {
                top = std::stoi(req.get_param_value("top"));
            } catch (const std::exception&) {
                return send(res, error_reply(400, "top must be an integer"));
            }
        }
        send(res, recommend(req.body, mode, top));
    });
    server.Post("/fit", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, fit(req.body)); });
    server.Post("/predict", [this, send](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_param("session")) return send(res, error_reply(400, "missing session parameter"));
        send(res, predict(req.get_param_value("session"), req.body));
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            const std::string msg = res.status == 413 ? "payload too large" : "request failed";
            res.set_content(json{{"error", msg}}.dump() + "\n", "application/json");
        }
    });
}

void serve(const std::string& model_path, const std::string& host, int port, const Config& cfg) {
    Service service(mapper::load_bundle(model_path), cfg, model_path + ".sessions");
    httplib::Server server;
    service.mount(server);
    spdlog::info("serving {} on {}:{}", model_path, host, port);
    if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace ciams::app
