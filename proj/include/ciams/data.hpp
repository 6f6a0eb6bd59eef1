#pragma once

#include "ciams/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ciams::data {

/// Labeled tabular data with binary labels in {-1, +1}.
struct Dataset {
    Matrix features;  // n x p
    Labels labels;    // length n
    std::vector<std::string> feature_names;
    std::string name;
    std::string label_name;
    std::string positive_symbol = "+1";  // raw label mapped to +1
    std::string negative_symbol = "-1";  // raw label mapped to -1

    [[nodiscard]] int rows() const { return static_cast<int>(features.rows()); }
    [[nodiscard]] int cols() const { return static_cast<int>(features.cols()); }
    [[nodiscard]] int count(int label) const;
    [[nodiscard]] bool has_both_classes() const { return count(1) > 0 && count(-1) > 0; }
};

struct Subsample {
    std::string parent_name;
    std::vector<int> row_indices;  // positions in the parent, repeats allowed
    Matrix features;               // standardized with subsample-local statistics
    Labels labels;
};

struct SplitSpec {
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct LoadOptions {
    std::string label_column = "last";
    bool impute = false;  // mean-impute blank/NA numeric cells instead of rejecting
};

/// Reads a comma-separated file with a header row.
Dataset load_csv(const std::string& path, const LoadOptions& options = {});
Dataset parse_csv(std::istream& in, const std::string& name, const LoadOptions& options = {});

/// Unlabeled rows, columns matched to `expected_names` by header name. A column
/// named `drop_column` is ignored, so a labeled file can be fed as unlabeled input.
Matrix parse_feature_csv(std::istream& in, const std::vector<std::string>& expected_names,
                         const std::string& drop_column = {});
Matrix load_feature_csv(const std::string& path, const std::vector<std::string>& expected_names,
                        const std::string& drop_column = {});

/// Per-column location/scale captured from one matrix and applied to others.
struct ColumnStats {
    Vector mean;
    Vector scale;  // population standard deviation, 0 for constant columns

    static ColumnStats fit(const Matrix& x);
    [[nodiscard]] Matrix apply(const Matrix& x) const;
};

/// Zero mean, unit population standard deviation per column; constant columns become zeros.
Matrix standardize(const Matrix& x);
Dataset standardize(const Dataset& d);

/// Bootstrap subsample size h for a dataset of n rows.
int subsample_size(int n);

/// Number of bootstrap subsamples b = alpha * ceil(n / (0.63 h)).
int subsample_count(int n, int h, int alpha = 5);

struct SubsampleOptions {
    int alpha = 5;
    std::optional<int> size;   // overrides subsample_size(n)
    std::optional<int> count;  // overrides subsample_count(...)
};

/// Stratified draws with replacement. Every subsample holds both classes and
/// matches the parent's class proportions to within one row.
std::vector<Subsample> draw_subsamples(const Dataset& d, std::uint64_t seed,
                                       const SubsampleOptions& options = {});

/// Disjoint train/test partition. Rows are ranked by a seeded hash of their
/// content, so the result does not depend on input row order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, const SplitSpec& spec);

/// Per-class row counts for a stratified draw of `total` rows.
std::pair<int, int> stratified_counts(int positives, int negatives, int total);

Dataset subset(const Dataset& d, const std::vector<int>& rows, const std::string& name);

}  // namespace ciams::data
