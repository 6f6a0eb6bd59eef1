#pragma once

#include "ciams/fitness.hpp"
#include "ciams/indices.hpp"
#include "ciams/learners.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ciams::mapper {

inline constexpr int kBundleVersion = 1;

struct ClassReport {
    double cv_r2 = 0.0;
    int best_depth = 0;
    bool degenerate = false;  // constant target; cv_r2 is reported as 0
};

/// One regressor per model class from index features to expected fitness.
struct MapperBundle {
    std::array<learners::GBTRegressor, learners::kModelClassCount> regressors;
    std::array<ClassReport, learners::kModelClassCount> reports{};
    std::vector<std::string> schema;
    int version = kBundleVersion;
    std::map<std::string, std::string> training_meta;
};

struct MapperOptions {
    std::vector<int> depth_grid{2, 4, 6};
    learners::RegressorParams regressor;
};

/// Per-class regressors with depth chosen by parent-grouped CV.
MapperBundle fit_mappers(const fitness::TrainingTable& table, int folds, std::uint64_t seed,
                         const MapperOptions& options = {});

/// Six predictions clamped to [0, 1]. Throws ValidationError("schema mismatch ...") on schema drift.
fitness::FitnessVector predict_fitness(const MapperBundle& bundle, const indices::IndexVector& iv);

void write_bundle(const MapperBundle& bundle, std::ostream& out);
MapperBundle read_bundle(std::istream& in);
void save_bundle(const MapperBundle& bundle, const std::string& path);
MapperBundle load_bundle(const std::string& path);

}  // namespace ciams::mapper
