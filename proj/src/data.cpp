#include "ciams/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <limits>
#include <optional>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace ciams::data {

int Dataset::count(int label) const {
    return static_cast<int>(std::count(labels.begin(), labels.end(), label));
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(trim(current));
    return fields;
}

std::vector<std::vector<std::string>> read_records(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        first = false;
        if (trim(line).empty()) continue;
        records.push_back(split_record(line));
    }
    if (records.empty()) throw ValidationError("empty file");
    return records;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "?";
}

std::optional<double> parse_number(const std::string& cell) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

// Fills a numeric matrix; missing cells are NaN when `impute` is set.
Matrix numeric_block(const std::vector<std::vector<std::string>>& records, const std::vector<int>& columns,
                     bool impute) {
    const auto n = static_cast<Eigen::Index>(records.size() - 1);
    Matrix x(n, static_cast<Eigen::Index>(columns.size()));
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& rec = records[static_cast<std::size_t>(r) + 1];
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const std::string& cell = rec[static_cast<std::size_t>(columns[c])];
            auto v = parse_number(cell);
            if (v) {
                x(r, static_cast<Eigen::Index>(c)) = *v;
            } else if (impute && is_missing(cell)) {
                x(r, static_cast<Eigen::Index>(c)) = std::numeric_limits<double>::quiet_NaN();
            } else {
                throw ValidationError("non-numeric cell at row " + std::to_string(r + 2) + ", column '" +
                                      records[0][static_cast<std::size_t>(columns[c])] + "'");
            }
        }
    }
    if (impute) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            double sum = 0.0;
            int seen = 0;
            for (Eigen::Index r = 0; r < n; ++r) {
                if (!std::isnan(x(r, c))) {
                    sum += x(r, c);
                    ++seen;
                }
            }
            if (seen == 0) throw ValidationError("column '" + records[0][static_cast<std::size_t>(columns[c])] +
                                                 "' has no numeric values");
            const double mean = sum / seen;
            for (Eigen::Index r = 0; r < n; ++r)
                if (std::isnan(x(r, c))) x(r, c) = mean;
        }
    }
    return x;
}

void check_widths(const std::vector<std::vector<std::string>>& records) {
    const auto width = records[0].size();
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].size() != width)
            throw ValidationError("row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                                  " fields, header has " + std::to_string(width));
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& name, const LoadOptions& options) {
    auto records = read_records(in);
    check_widths(records);
    const auto& header = records[0];
    if (header.size() < 2) throw ValidationError("need at least one feature column and a label column");
    if (records.size() < 3) throw ValidationError("need at least two data rows");

    int label_col = -1;
    if (options.label_column == "last") {
        label_col = static_cast<int>(header.size()) - 1;
    } else {
        auto it = std::find(header.begin(), header.end(), options.label_column);
        if (it == header.end()) throw ValidationError("label column '" + options.label_column + "' not found");
        label_col = static_cast<int>(it - header.begin());
    }

    std::map<std::string, int> symbol_counts;
    for (std::size_t r = 1; r < records.size(); ++r) ++symbol_counts[records[r][static_cast<std::size_t>(label_col)]];
    if (symbol_counts.size() < 2) throw ValidationError("not binary: label column has fewer than 2 classes");
    if (symbol_counts.size() > 2) throw ValidationError("not binary: label column has more than 2 classes");

    // Minority class is positive; on an exact tie the lexicographically smaller symbol is.
    auto first = symbol_counts.begin();
    auto second = std::next(first);
    const bool first_positive = first->second <= second->second;
    const std::string positive = first_positive ? first->first : second->first;
    const std::string negative = first_positive ? second->first : first->first;

    std::vector<int> feature_cols;
    Dataset d;
    for (int c = 0; c < static_cast<int>(header.size()); ++c) {
        if (c == label_col) continue;
        feature_cols.push_back(c);
        d.feature_names.push_back(header[static_cast<std::size_t>(c)]);
    }
    d.features = numeric_block(records, feature_cols, options.impute);
    d.labels.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r)
        d.labels.push_back(records[r][static_cast<std::size_t>(label_col)] == positive ? 1 : -1);
    d.name = name;
    d.label_name = header[static_cast<std::size_t>(label_col)];
    d.positive_symbol = positive;
    d.negative_symbol = negative;
    return d;
}

Dataset load_csv(const std::string& path, const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    std::string stem = path;
    if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
    if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
    return parse_csv(in, stem, options);
}

Matrix parse_feature_csv(std::istream& in, const std::vector<std::string>& expected_names,
                         const std::string& drop_column) {
    auto records = read_records(in);
    check_widths(records);
    const auto& header = records[0];
    std::vector<int> cols;
    for (const auto& name : expected_names) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ValidationError("missing feature column '" + name + "'");
        cols.push_back(static_cast<int>(it - header.begin()));
    }
    for (const auto& name : header)
        if (name != drop_column && std::find(expected_names.begin(), expected_names.end(), name) == expected_names.end())
            throw ValidationError("unexpected column '" + name + "'");
    if (records.size() == 1) return Matrix(0, static_cast<Eigen::Index>(cols.size()));
    return numeric_block(records, cols, false);
}

Matrix load_feature_csv(const std::string& path, const std::vector<std::string>& expected_names,
                        const std::string& drop_column) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path);
    return parse_feature_csv(in, expected_names, drop_column);
}

ColumnStats ColumnStats::fit(const Matrix& x) {
    ColumnStats s;
    const double n = static_cast<double>(x.rows());
    s.mean = x.colwise().mean().transpose();
    s.scale = Vector::Zero(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
        s.scale(c) = std::sqrt(var);
    }
    return s;
}

Matrix ColumnStats::apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        // Relative threshold: a column that is constant up to rounding is treated as constant.
        const bool constant = scale(c) <= 1e-12 * std::max(1.0, std::abs(mean(c)));
        if (constant)
            out.col(c).setZero();
        else
            out.col(c) = (x.col(c).array() - mean(c)) / scale(c);
    }
    return out;
}

Matrix standardize(const Matrix& x) {
    if (x.rows() == 0) return x;
    return ColumnStats::fit(x).apply(x);
}

Dataset standardize(const Dataset& d) {
    Dataset out = d;
    out.features = standardize(d.features);
    return out;
}

int subsample_size(int n) {
    if (n <= 500) return 100;
    if (n <= 2000) return 300;
    return 500;
}

int subsample_count(int n, int h, int alpha) {
    // 0.63 h rows of a bootstrap draw are expected to be distinct.
    const double ratio = static_cast<double>(n) / (0.63 * static_cast<double>(h));
    // Guard against ratio landing a hair above an integer through rounding (e.g. n=63, h=100).
    const double blocks = std::ceil(ratio - 1e-9);
    return alpha * std::max(1, static_cast<int>(blocks));
}

std::pair<int, int> stratified_counts(int positives, int negatives, int total) {
    const int n = positives + negatives;
    int pos = static_cast<int>(std::llround(static_cast<double>(total) * positives / n));
    pos = std::clamp(pos, 1, total - 1);
    return {pos, total - pos};
}

std::vector<Subsample> draw_subsamples(const Dataset& d, std::uint64_t seed, const SubsampleOptions& options) {
    std::vector<int> pos_rows;
    std::vector<int> neg_rows;
    for (int i = 0; i < d.rows(); ++i) (d.labels[static_cast<std::size_t>(i)] == 1 ? pos_rows : neg_rows).push_back(i);
    if (pos_rows.empty() || neg_rows.empty())
        throw ValidationError("dataset '" + d.name + "' has a class with 0 members");

    const int h = options.size.value_or(subsample_size(d.rows()));
    if (h < 2) throw ValidationError("subsample size must be at least 2");
    const int b = options.count.value_or(subsample_count(d.rows(), h, options.alpha));
    const auto [n_pos, n_neg] =
        stratified_counts(static_cast<int>(pos_rows.size()), static_cast<int>(neg_rows.size()), h);

    std::mt19937_64 rng(seed);
    std::vector<Subsample> out;
    out.reserve(static_cast<std::size_t>(b));
    std::uniform_int_distribution<std::size_t> pick_pos(0, pos_rows.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neg(0, neg_rows.size() - 1);
    for (int j = 0; j < b; ++j) {
        Subsample s;
        s.parent_name = d.name;
        s.row_indices.reserve(static_cast<std::size_t>(h));
        for (int i = 0; i < n_pos; ++i) s.row_indices.push_back(pos_rows[pick_pos(rng)]);
        for (int i = 0; i < n_neg; ++i) s.row_indices.push_back(neg_rows[pick_neg(rng)]);
        std::shuffle(s.row_indices.begin(), s.row_indices.end(), rng);
        s.features = standardize(select_rows(d.features, s.row_indices));
        s.labels = select_labels(d.labels, s.row_indices);
        out.push_back(std::move(s));
    }
    return out;
}

Dataset subset(const Dataset& d, const std::vector<int>& rows, const std::string& name) {
    Dataset out;
    out.features = select_rows(d.features, rows);
    out.labels = select_labels(d.labels, rows);
    out.feature_names = d.feature_names;
    out.name = name;
    out.positive_symbol = d.positive_symbol;
    out.negative_symbol = d.negative_symbol;
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ValidationError("train fraction must lie in (0, 1)");
    const int n = d.rows();
    const int n_pos = d.count(1);
    const int n_neg = d.count(-1);
    if (spec.stratified && (n_pos < 2 || n_neg < 2))
        throw ValidationError("class too small to stratify in dataset '" + d.name + "'");

    // Content-derived ordering: identical multisets of rows split identically.
    std::vector<std::uint64_t> key(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::uint64_t h = derive_seed(spec.seed, static_cast<std::uint64_t>(d.labels[static_cast<std::size_t>(i)] + 2));
        for (Eigen::Index c = 0; c < d.features.cols(); ++c) {
            double v = d.features(i, c);
            if (v == 0.0) v = 0.0;  // fold -0.0 into +0.0
            std::uint64_t bits = 0;
            std::memcpy(&bits, &v, sizeof bits);
            h = mix_seed(h ^ bits);
        }
        key[static_cast<std::size_t>(i)] = h;
    }
    auto before = [&](int a, int b) {
        if (key[static_cast<std::size_t>(a)] != key[static_cast<std::size_t>(b)])
            return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
        for (Eigen::Index c = 0; c < d.features.cols(); ++c)
            if (d.features(a, c) != d.features(b, c)) return d.features(a, c) < d.features(b, c);
        return false;
    };

    const int n_train = std::clamp(static_cast<int>(std::llround(spec.train_fraction * n)), 1, n - 1);
    std::vector<int> train_rows;
    std::vector<int> test_rows;
    if (spec.stratified) {
        auto [train_pos, train_neg] = stratified_counts(n_pos, n_neg, n_train);
        train_pos = std::clamp(train_pos, 1, n_pos - 1);
        train_neg = std::clamp(train_neg, 1, n_neg - 1);
        for (int label : {1, -1}) {
            std::vector<int> rows;
            for (int i = 0; i < n; ++i)
                if (d.labels[static_cast<std::size_t>(i)] == label) rows.push_back(i);
            std::stable_sort(rows.begin(), rows.end(), before);
            const int take = label == 1 ? train_pos : train_neg;
            train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + take);
            test_rows.insert(test_rows.end(), rows.begin() + take, rows.end());
        }
    } else {
        std::vector<int> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), 0);
        std::stable_sort(rows.begin(), rows.end(), before);
        train_rows.assign(rows.begin(), rows.begin() + n_train);
        test_rows.assign(rows.begin() + n_train, rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {subset(d, train_rows, d.name), subset(d, test_rows, d.name)};
}

}  // namespace ciams::data
