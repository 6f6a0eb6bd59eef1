#pragma once

#include "ciams/data.hpp"
#include "ciams/indices.hpp"
#include "ciams/learners.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ciams::fitness {

/// Tuned CV score per model class, in ModelClass order.
using FitnessVector = std::array<double, learners::kModelClassCount>;

struct FitnessOptions {
    int folds = 5;
    learners::Metric metric = learners::Metric::F1;
};

FitnessVector model_fitness(const data::Subsample& s, std::uint64_t seed, const FitnessOptions& options = {});
FitnessVector model_fitness(const Matrix& x, const Labels& y, std::uint64_t seed, const FitnessOptions& options = {});

struct TableRow {
    std::vector<double> features;  // IndexVector values
    FitnessVector fitness{};
    std::string subsample_ref;  // parent/partition/index
    std::string parent;
    std::string partition;  // "train" or "test"
    bool representative = true;  // passes the Hotelling test against its partition
};

struct TrainingTable {
    std::vector<std::string> schema;
    std::vector<TableRow> rows;

    [[nodiscard]] Matrix feature_matrix() const;
    [[nodiscard]] Vector target(learners::ModelClass c) const;
    /// Dense parent id per row, numbered in order of first appearance.
    [[nodiscard]] std::vector<int> parent_ids() const;
    [[nodiscard]] std::vector<std::string> parents() const;
};

struct TableOptions {
    std::vector<cluster::Method> methods{cluster::kAllMethods.begin(), cluster::kAllMethods.end()};
    indices::VectorOptions vector;
    FitnessOptions fitness;
    data::SubsampleOptions subsampling;
    double train_fraction = 0.7;
    double hotelling_alpha = 0.05;
};

/// Rows of one dataset: split, subsample each partition, then index and score every subsample.
std::vector<TableRow> dataset_rows(const data::Dataset& d, std::uint64_t seed, const TableOptions& options = {});

/// Concatenates dataset_rows over the corpus in corpus order.
TrainingTable build_training_table(const std::vector<data::Dataset>& corpus, std::uint64_t seed,
                                   const TableOptions& options = {});

/// Header: parent, partition, subsample_ref, representative, schema names, fitness:<class> columns.
void write_table_csv(const TrainingTable& table, std::ostream& out);
TrainingTable read_table_csv(std::istream& in);

/// Shortest text that parses back to the same double.
std::string format_double(double x);

}  // namespace ciams::fitness
