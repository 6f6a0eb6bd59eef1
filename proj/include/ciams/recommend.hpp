#pragma once

#include "ciams/data.hpp"
#include "ciams/learners.hpp"
#include "ciams/mapper.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ciams::recommend {

enum class Mode { SingleShot, Subsampled };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct Recommendation {
    std::vector<std::pair<learners::ModelClass, double>> ranked;  // descending, ties in ModelClass order
    Mode mode = Mode::Subsampled;
    int n_subsamples_used = 0;
    int n_subsamples_rejected = 0;
};

struct Options {
    double hotelling_alpha = 0.05;
    indices::VectorOptions vector;
    data::SubsampleOptions subsampling;
    int folds = 5;  // AutoML top-3 cross-validation
    learners::Metric metric = learners::Metric::F1;
};

/// Orders the six predictions.
Recommendation rank(const fitness::FitnessVector& predicted, Mode mode);

/// One IndexVector on the whole (standardized) dataset.
Recommendation recommend_single_shot(const mapper::MapperBundle& bundle, const data::Dataset& d, std::uint64_t seed,
                                     const Options& options = {});

/// Bootstrap subsamples, Hotelling filter against the full dataset, averaged predictions.
Recommendation recommend_subsampled(const mapper::MapperBundle& bundle, const data::Dataset& d, std::uint64_t seed,
                                    const Options& options = {});

Recommendation recommend(const mapper::MapperBundle& bundle, const data::Dataset& d, Mode mode, std::uint64_t seed,
                         const Options& options = {});

std::vector<learners::ModelClass> top_k(const Recommendation& rec, int k);

/// Averages per-subsample fitness predictions in the given order.
fitness::FitnessVector average(const std::vector<fitness::FitnessVector>& predictions);

struct AutoMLResult {
    learners::ModelClass chosen = learners::ModelClass::DecisionTree;
    std::vector<learners::ModelClass> top3;
    std::vector<double> top3_cv_f1;
    double cv_f1_of_chosen = 0.0;
    Labels predictions;
    std::vector<learners::ModelClass> evaluated;  // every class that was tuned
    learners::TunedClassifier model;
    data::ColumnStats column_stats;  // labeled-partition standardization
    Recommendation recommendation;
};

/// Recommends on the labeled data, tunes the top three classes, predicts with the best.
/// `unlabeled` is in raw units; it is standardized with the labeled statistics.
AutoMLResult automl_fit_predict(const mapper::MapperBundle& bundle, const data::Dataset& labeled,
                                const Matrix& unlabeled, std::uint64_t seed, const Options& options = {});

/// Fixed-width text table shared by the CLI and the service.
std::string format_recommendation(const Recommendation& rec, int top = 6);

}  // namespace ciams::recommend
