#include "ciams/fitness.hpp"

#include "ciams/parallel.hpp"
#include "ciams/stats.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace ciams::fitness {

namespace {

const std::string kFitnessPrefix = "fitness:";

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ValidationError("bad number in table: '" + s + "'");
    return v;
}

struct Job {
    const data::Subsample* subsample;
    const Matrix* population;  // standardized partition
    std::string partition;
    std::size_t index;
    std::uint64_t seed;
};

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

FitnessVector model_fitness(const Matrix& x, const Labels& y, std::uint64_t seed, const FitnessOptions& options) {
    FitnessVector out{};
    for (learners::ModelClass c : learners::kAllModelClasses) {
        const auto r = learners::tune(c, x, y, derive_seed(seed, static_cast<std::uint64_t>(learners::index_of(c))),
                                      {options.folds, options.metric});
        out[static_cast<std::size_t>(learners::index_of(c))] = r.cv_score;
    }
    return out;
}

FitnessVector model_fitness(const data::Subsample& s, std::uint64_t seed, const FitnessOptions& options) {
    return model_fitness(s.features, s.labels, seed, options);
}

Matrix TrainingTable::feature_matrix() const {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < schema.size(); ++j)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r].features[j];
    return m;
}

Vector TrainingTable::target(learners::ModelClass c) const {
    Vector v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        v[static_cast<Eigen::Index>(r)] = rows[r].fitness[static_cast<std::size_t>(learners::index_of(c))];
    return v;
}

std::vector<std::string> TrainingTable::parents() const {
    std::vector<std::string> out;
    for (const auto& row : rows)
        if (std::find(out.begin(), out.end(), row.parent) == out.end()) out.push_back(row.parent);
    return out;
}

std::vector<int> TrainingTable::parent_ids() const {
    std::map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        const auto [it, inserted] = ids.emplace(row.parent, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

namespace {

std::vector<std::vector<TableRow>> rows_for(const std::vector<data::Dataset>& corpus, std::uint64_t seed,
                                            const TableOptions& options) {
    // Draw everything first, then score all subsamples as one flat parallel batch.
    std::vector<std::vector<data::Subsample>> drawn(corpus.size() * 2);
    std::vector<Matrix> populations(corpus.size() * 2);
    std::vector<Job> jobs;
    std::vector<std::size_t> owner;
    for (std::size_t di = 0; di < corpus.size(); ++di) {
        const data::Dataset& d = corpus[di];
        if (!d.has_both_classes()) throw ValidationError("dataset '" + d.name + "' needs both classes");
        const std::uint64_t ds_seed = derive_seed(seed, hash_string(d.name));
        const auto [train, test] = data::stratified_split(d, {options.train_fraction, derive_seed(ds_seed, 1), true});
        if (!train.has_both_classes() || !test.has_both_classes())
            throw ValidationError("dataset '" + d.name + "' is too small to stratify");
        const std::pair<const data::Dataset*, std::string> parts[] = {{&train, "train"}, {&test, "test"}};
        for (std::size_t pi = 0; pi < 2; ++pi) {
            auto& subs = drawn[di * 2 + pi];
            subs = data::draw_subsamples(*parts[pi].first, derive_seed(ds_seed, 2, pi), options.subsampling);
            populations[di * 2 + pi] = data::standardize(parts[pi].first->features);
            for (std::size_t i = 0; i < subs.size(); ++i) {
                jobs.push_back({&subs[i], &populations[di * 2 + pi], parts[pi].second, i, derive_seed(ds_seed, 3 + pi, i)});
                owner.push_back(di);
            }
        }
    }
    std::vector<TableRow> flat(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t j) {
        const Job& job = jobs[j];
        const data::Dataset& d = corpus[owner[j]];
        TableRow row;
        row.features = indices::index_vector(job.subsample->features, job.subsample->labels, options.methods,
                                             derive_seed(job.seed, 1), options.vector)
                           .values;
        row.fitness = model_fitness(*job.subsample, derive_seed(job.seed, 2), options.fitness);
        row.parent = d.name;
        row.partition = job.partition;
        row.subsample_ref = d.name + "/" + job.partition + "/" + std::to_string(job.index);
        try {
            row.representative = !stats::hotelling_t2(select_rows(*job.population, job.subsample->row_indices),
                                                      *job.population, options.hotelling_alpha)
                                      .reject;
        } catch (const ValidationError&) {
            row.representative = true;
        }
        flat[j] = std::move(row);
    });
    std::vector<std::vector<TableRow>> out(corpus.size());
    for (std::size_t j = 0; j < flat.size(); ++j) out[owner[j]].push_back(std::move(flat[j]));
    return out;
}

}  // namespace

std::vector<TableRow> dataset_rows(const data::Dataset& d, std::uint64_t seed, const TableOptions& options) {
    return std::move(rows_for({d}, seed, options).front());
}

TrainingTable build_training_table(const std::vector<data::Dataset>& corpus, std::uint64_t seed,
                                   const TableOptions& options) {
    if (corpus.empty()) throw ValidationError("empty corpus");
    TrainingTable table;
    table.schema = indices::Schema{options.methods}.names();
    for (auto& rows : rows_for(corpus, seed, options))
        for (auto& row : rows) table.rows.push_back(std::move(row));
    return table;
}

void write_table_csv(const TrainingTable& table, std::ostream& out) {
    out << "parent,partition,subsample_ref,representative";
    for (const auto& name : table.schema) out << ',' << name;
    for (learners::ModelClass c : learners::kAllModelClasses) out << ',' << kFitnessPrefix << learners::model_class_name(c);
    out << '\n';
    for (const auto& row : table.rows) {
        out << row.parent << ',' << row.partition << ',' << row.subsample_ref << ',' << (row.representative ? 1 : 0);
        for (double v : row.features) out << ',' << format_double(v);
        for (double v : row.fitness) out << ',' << format_double(v);
        out << '\n';
    }
}

TrainingTable read_table_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty table");
    const auto header = split_line(line);
    constexpr std::size_t kLead = 4;
    const std::size_t n_fit = learners::kModelClassCount;
    if (header.size() < kLead + n_fit || header[0] != "parent" || header[1] != "partition" || header[2] != "subsample_ref" ||
        header[3] != "representative")
        throw ValidationError("malformed table header");
    TrainingTable table;
    table.schema.assign(header.begin() + kLead, header.end() - static_cast<std::ptrdiff_t>(n_fit));
    for (learners::ModelClass c : learners::kAllModelClasses) {
        const auto& h = header[kLead + table.schema.size() + static_cast<std::size_t>(learners::index_of(c))];
        if (h != kFitnessPrefix + learners::model_class_name(c)) throw ValidationError("malformed table header: " + h);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) throw ValidationError("table row has wrong column count");
        TableRow row;
        row.parent = cells[0];
        row.partition = cells[1];
        row.subsample_ref = cells[2];
        if (cells[3] != "0" && cells[3] != "1") throw ValidationError("bad representative flag: " + cells[3]);
        row.representative = cells[3] == "1";
        for (std::size_t j = 0; j < table.schema.size(); ++j) row.features.push_back(parse_double(cells[kLead + j]));
        for (std::size_t k = 0; k < n_fit; ++k) row.fitness[k] = parse_double(cells[kLead + table.schema.size() + k]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace ciams::fitness
