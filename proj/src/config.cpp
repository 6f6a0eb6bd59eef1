#include "ciams/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ciams::app {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long to_int(const std::string& key, const std::string& v, long long lo, long long hi) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        throw ValidationError("config " + key + ": not an integer: '" + v + "'");
    }
    if (used != v.size()) throw ValidationError("config " + key + ": not an integer: '" + v + "'");
    if (x < lo || x > hi) throw ValidationError("config " + key + ": out of range: " + v);
    return x;
}

double to_real(const std::string& key, const std::string& v, double lo, double hi) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ValidationError("config " + key + ": not a number: '" + v + "'");
    }
    if (used != v.size()) throw ValidationError("config " + key + ": not a number: '" + v + "'");
    if (!(x >= lo && x <= hi)) throw ValidationError("config " + key + ": out of range: " + v);
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config " + key + ": expected true/false, got '" + v + "'");
}

std::string real_text(double x) { return fitness::format_double(x); }

}  // namespace

void apply_setting(Config& cfg, const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "alpha") {
        cfg.alpha = static_cast<int>(to_int(key, v, 1, 1000));
    } else if (key == "impute") {
        cfg.impute = to_bool(key, v);
    } else if (key == "seed") {
        try {
            std::size_t used = 0;
            cfg.seed = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ValidationError("config seed: not an unsigned integer: '" + v + "'");
        }
    } else if (key == "clustering.methods") {
        std::vector<cluster::Method> methods;
        for (const auto& name : split_list(v)) {
            const auto parsed = cluster::parse_method(name);
            if (!parsed) throw ValidationError("config clustering.methods: unknown method '" + name + "'");
            const auto m = *parsed;
            if (std::find(methods.begin(), methods.end(), m) != methods.end())
                throw ValidationError("config clustering.methods: duplicate " + name);
            methods.push_back(m);
        }
        if (methods.empty()) throw ValidationError("config clustering.methods: empty");
        // schema order is canonical regardless of listing order
        std::sort(methods.begin(), methods.end());
        cfg.methods = methods;
    } else if (key == "clustering.k") {
        cfg.k = static_cast<int>(to_int(key, v, 2, 100));
    } else if (key == "hdbscan.min_cluster_size_fraction") {
        cfg.hdbscan_fraction = to_real(key, v, 0.0, 0.5);
    } else if (key == "label_column") {
        if (v.empty()) throw ValidationError("config label_column: empty");
        cfg.label_column = v;
    } else if (key == "folds") {
        cfg.folds = static_cast<int>(to_int(key, v, 2, 1000));
    } else if (key == "repeats") {
        cfg.repeats = static_cast<int>(to_int(key, v, 1, 1000));
    } else if (key == "threads") {
        cfg.threads = static_cast<unsigned>(to_int(key, v, 0, 1024));
    } else if (key == "fitness.metric") {
        if (v == "f1") cfg.metric = learners::Metric::F1;
        else if (v == "weighted_f1") cfg.metric = learners::Metric::WeightedF1;
        else throw ValidationError("config fitness.metric: expected f1 or weighted_f1, got '" + v + "'");
    } else if (key == "service.ttl_seconds") {
        cfg.ttl_seconds = static_cast<int>(to_int(key, v, 1, 1LL << 30));
    } else if (key == "service.max_body_bytes") {
        cfg.max_body_bytes = static_cast<std::size_t>(to_int(key, v, 1, 1LL << 40));
    } else if (key == "recommend.mode") {
        cfg.mode = recommend::parse_mode(v);
    } else if (key == "hotelling.alpha") {
        cfg.hotelling_alpha = to_real(key, v, 0.0, 1.0);
    } else if (key == "mapper.depths") {
        std::vector<int> depths;
        for (const auto& d : split_list(v)) depths.push_back(static_cast<int>(to_int(key, d, 1, 64)));
        if (depths.empty()) throw ValidationError("config mapper.depths: empty");
        cfg.mapper_depths = depths;
    } else if (key == "mapper.folds") {
        cfg.mapper_folds = static_cast<int>(to_int(key, v, 2, 100));
    } else {
        throw ValidationError("unknown config key '" + key + "'");
    }
}

void apply_config(Config& cfg, std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
        apply_setting(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

void apply_config_file(Config& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    apply_config(cfg, in);
}

void apply_environment(Config& cfg) {
    if (const char* s = std::getenv("CIAMS_SEED"); s != nullptr && *s != '\0') apply_setting(cfg, "seed", s);
}

std::vector<std::pair<std::string, std::string>> describe(const Config& cfg) {
    std::string methods;
    for (auto m : cfg.methods) methods += (methods.empty() ? "" : ",") + cluster::method_name(m);
    std::string depths;
    for (int d : cfg.mapper_depths) depths += (depths.empty() ? "" : ",") + std::to_string(d);
    return {
        {"alpha", std::to_string(cfg.alpha)},
        {"clustering.k", std::to_string(cfg.k)},
        {"clustering.methods", methods},
        {"fitness.metric", cfg.metric == learners::Metric::F1 ? "f1" : "weighted_f1"},
        {"folds", std::to_string(cfg.folds)},
        {"hdbscan.min_cluster_size_fraction", real_text(cfg.hdbscan_fraction)},
        {"hotelling.alpha", real_text(cfg.hotelling_alpha)},
        {"impute", cfg.impute ? "true" : "false"},
        {"label_column", cfg.label_column},
        {"mapper.depths", depths},
        {"mapper.folds", std::to_string(cfg.mapper_folds)},
        {"recommend.mode", recommend::mode_name(cfg.mode)},
        {"repeats", std::to_string(cfg.repeats)},
        {"seed", std::to_string(cfg.seed)},
    };
}

data::LoadOptions load_options(const Config& cfg) { return {cfg.label_column, cfg.impute}; }

indices::VectorOptions vector_options(const Config& cfg) {
    indices::VectorOptions o;
    o.clustering.k = cfg.k;
    o.clustering.hdbscan_min_cluster_size_fraction = cfg.hdbscan_fraction;
    return o;
}

fitness::TableOptions table_options(const Config& cfg) {
    fitness::TableOptions o;
    o.methods = cfg.methods;
    o.vector = vector_options(cfg);
    o.fitness.metric = cfg.metric;
    o.subsampling.alpha = cfg.alpha;
    o.hotelling_alpha = cfg.hotelling_alpha;
    return o;
}

recommend::Options recommend_options(const Config& cfg) {
    recommend::Options o;
    o.hotelling_alpha = cfg.hotelling_alpha;
    o.vector = vector_options(cfg);
    o.subsampling.alpha = cfg.alpha;
    o.metric = cfg.metric;
    return o;
}

mapper::MapperOptions mapper_options(const Config& cfg) {
    mapper::MapperOptions o;
    o.depth_grid = cfg.mapper_depths;
    return o;
}

std::vector<data::Dataset> load_corpus(const std::string& dir, const data::LoadOptions& options) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ValidationError("corpus directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<data::Dataset> corpus;
    for (const auto& f : files) corpus.push_back(data::load_csv(f.string(), options));
    if (corpus.empty()) throw ValidationError("empty corpus: no .csv files in " + dir);
    return corpus;
}

}  // namespace ciams::app
