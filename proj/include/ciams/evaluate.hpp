#pragma once

#include "ciams/config.hpp"
#include "ciams/fitness.hpp"
#include "ciams/mapper.hpp"
#include "ciams/stats.hpp"

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace ciams::app {

inline constexpr std::size_t kClasses = learners::kModelClassCount;

/// One held-out dataset in one repeat.
struct HeldOut {
    std::string dataset;
    int repeat = 0;
    int fold = 0;
    fitness::FitnessVector true_fitness{};       // mean subsample fitness
    fitness::FitnessVector predicted_fitness{};  // mean prediction over representative subsamples
    std::array<double, kClasses> mae{};
    std::array<stats::MeanDiffTestResult, kClasses> tests{};
    std::vector<learners::ModelClass> true_top3;
    std::vector<learners::ModelClass> predicted_top3;
    bool top1_in_top3 = false;
    int subsamples = 0;
    int subsamples_used = 0;
};

struct EvalReport {
    std::array<double, kClasses> per_class_r2{};
    std::array<std::pair<double, double>, kClasses> per_class_mae{};  // mean, std over held-out evaluations
    std::array<int, kClasses> pass_counts{};
    std::array<std::array<int, 3>, 3> rank_confusion{};  // [true position][predicted position]
    double top1_in_top3_recall = 0.0;
    std::vector<int> hits_per_repeat;
    std::vector<HeldOut> held_out;
    std::vector<std::pair<std::string, std::string>> configuration;
};

/// Dataset-level K-fold evaluation of the whole pipeline; each repeat reshuffles the dataset folds.
EvalReport evaluate_corpus(const std::vector<data::Dataset>& corpus, const Config& cfg);
EvalReport evaluate_corpus(const std::string& corpus_dir, const Config& cfg);
/// Same evaluation on a prebuilt table; datasets are its parents in order of first appearance.
EvalReport evaluate_table(const fitness::TrainingTable& table, const Config& cfg);

/// Fixed-format JSON; identical inputs give identical bytes.
std::string report_json(const EvalReport& report);

struct FeatureImportance {
    std::string feature;
    double gain = 0.0;
    double spearman = 0.0;
};

/// Top features of one class's regressor by total split gain, with the Spearman
/// correlation between each feature column and that class's fitness column.
std::vector<FeatureImportance> feature_importance(const mapper::MapperBundle& bundle, const fitness::TrainingTable& table,
                                                  learners::ModelClass c, std::size_t top = 10);

}  // namespace ciams::app
