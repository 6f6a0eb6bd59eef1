#pragma once

#include "ciams/config.hpp"
#include "ciams/learners.hpp"
#include "ciams/mapper.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace ciams::app {

nlohmann::json classifier_to_json(const learners::TunedClassifier& t);
learners::TunedClassifier classifier_from_json(const nlohmann::json& j);

/// A fitted AutoML model kept between /fit and /predict.
struct Session {
    std::string id;
    std::int64_t created = 0;  // unix seconds
    learners::TunedClassifier model;
    data::ColumnStats column_stats;
    std::vector<std::string> feature_names;
    std::string label_name;
    std::string positive_symbol;
    std::string negative_symbol;
    std::vector<learners::ModelClass> top3;
};

/// One JSON file per session under `dir`; entries older than the TTL are evicted.
class SessionStore {
public:
    SessionStore(std::string dir, int ttl_seconds);
    std::string put(Session s);
    [[nodiscard]] std::optional<Session> get(const std::string& id);
    void evict_expired();

private:
    [[nodiscard]] std::string path_of(const std::string& id) const;
    std::string dir_;
    int ttl_;
    std::mutex mutex_;
};

struct Reply {
    int status = 200;
    std::string body;  // JSON
};

/// Request handlers, independent of the HTTP transport.
class Service {
public:
    Service(mapper::MapperBundle bundle, Config cfg, std::string session_dir);

    Reply health() const;
    Reply recommend(const std::string& csv, const std::optional<std::string>& mode, int top) const;
    Reply fit(const std::string& csv);
    Reply predict(const std::string& session_id, const std::string& csv);

    /// Registers the routes on an httplib server (also sets the payload limit).
    void mount(httplib::Server& server);

private:
    mapper::MapperBundle bundle_;
    Config cfg_;
    SessionStore sessions_;
};

/// Text of `ciams recommend`; the service embeds the same string.
std::string recommendation_text(const mapper::MapperBundle& bundle, const data::Dataset& d, const Config& cfg, int top);

/// Blocks serving on host:port.
void serve(const std::string& model_path, const std::string& host, int port, const Config& cfg);

}  // namespace ciams::app
