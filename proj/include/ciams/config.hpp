#pragma once

#include "ciams/cluster.hpp"
#include "ciams/data.hpp"
#include "ciams/fitness.hpp"
#include "ciams/learners.hpp"
#include "ciams/mapper.hpp"
#include "ciams/recommend.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ciams::app {

struct Config {
    int alpha = 5;  // subsample-count multiplier
    bool impute = false;
    std::uint64_t seed = 42;
    std::vector<cluster::Method> methods{cluster::kAllMethods.begin(), cluster::kAllMethods.end()};
    int k = 2;
    double hdbscan_fraction = 0.01;
    std::string label_column = "last";
    int folds = 6;    // dataset-level folds in evaluate
    int repeats = 2;  // evaluate repeats
    unsigned threads = 0;
    learners::Metric metric = learners::Metric::F1;
    int ttl_seconds = 3600;
    std::size_t max_body_bytes = 64U << 20U;
    recommend::Mode mode = recommend::Mode::Subsampled;
    double hotelling_alpha = 0.05;
    std::vector<int> mapper_depths{2, 4, 6};
    int mapper_folds = 5;
};

/// key=value lines; '#' starts a comment. Unknown keys and bad values throw ValidationError.
void apply_config(Config& cfg, std::istream& in);
void apply_config_file(Config& cfg, const std::string& path);
void apply_setting(Config& cfg, const std::string& key, const std::string& value);

/// CIAMS_SEED overrides the seed when set.
void apply_environment(Config& cfg);

/// Canonical key=value rendering of every setting that affects results.
std::vector<std::pair<std::string, std::string>> describe(const Config& cfg);

data::LoadOptions load_options(const Config& cfg);
indices::VectorOptions vector_options(const Config& cfg);
fitness::TableOptions table_options(const Config& cfg);
recommend::Options recommend_options(const Config& cfg);
mapper::MapperOptions mapper_options(const Config& cfg);

/// Every *.csv in the directory, sorted by file name.
std::vector<data::Dataset> load_corpus(const std::string& dir, const data::LoadOptions& options);

}  // namespace ciams::app
