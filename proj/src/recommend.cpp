#include "ciams/recommend.hpp"

#include "ciams/parallel.hpp"
#include "ciams/stats.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>

namespace ciams::recommend {

namespace {

std::vector<cluster::Method> bundle_methods(const mapper::MapperBundle& bundle) {
    return indices::schema_from_names(bundle.schema).methods;
}

}  // namespace

std::string mode_name(Mode m) { return m == Mode::SingleShot ? "single-shot" : "subsampled"; }

Mode parse_mode(const std::string& s) {
    std::string k = s;
    for (auto& ch : k) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    std::replace(k.begin(), k.end(), '_', '-');
    if (k == "single-shot" || k == "singleshot") return Mode::SingleShot;
    if (k == "subsampled" || k == "subsamples") return Mode::Subsampled;
    throw ValidationError("unknown mode '" + s + "'");
}

Recommendation rank(const fitness::FitnessVector& predicted, Mode mode) {
    Recommendation rec;
    rec.mode = mode;
    for (learners::ModelClass c : learners::kAllModelClasses)
        rec.ranked.emplace_back(c, predicted[static_cast<std::size_t>(learners::index_of(c))]);
    std::stable_sort(rec.ranked.begin(), rec.ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return rec;
}

fitness::FitnessVector average(const std::vector<fitness::FitnessVector>& predictions) {
    fitness::FitnessVector sum{};
    if (predictions.empty()) return sum;
    for (const auto& p : predictions)
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += p[k];
    for (auto& v : sum) v /= static_cast<double>(predictions.size());
    return sum;
}

Recommendation recommend_single_shot(const mapper::MapperBundle& bundle, const data::Dataset& d, std::uint64_t seed,
                                     const Options& options) {
    if (!d.has_both_classes()) throw ValidationError("dataset needs both classes");
    if (d.rows() < options.vector.clustering.k) throw ValidationError("clustering infeasible: fewer rows than clusters");
    const Matrix z = data::standardize(d.features);
    const auto iv = indices::index_vector(z, d.labels, bundle_methods(bundle), derive_seed(seed, 0x73696e67), options.vector);
    Recommendation rec = rank(mapper::predict_fitness(bundle, iv), Mode::SingleShot);
    rec.n_subsamples_used = 1;
    return rec;
}

Recommendation recommend_subsampled(const mapper::MapperBundle& bundle, const data::Dataset& d, std::uint64_t seed,
                                    const Options& options) {
    if (!d.has_both_classes()) throw ValidationError("dataset needs both classes");
    const auto methods = bundle_methods(bundle);
    const auto subs = data::draw_subsamples(d, derive_seed(seed, 0x73756273), options.subsampling);
    const Matrix z = data::standardize(d.features);

    std::vector<char> keep(subs.size(), 1);
    std::vector<fitness::FitnessVector> predicted(subs.size());
    parallel_for(subs.size(), [&](std::size_t i) {
        try {
            const auto test = stats::hotelling_t2(select_rows(z, subs[i].row_indices), z, options.hotelling_alpha);
            keep[i] = test.reject ? 0 : 1;
        } catch (const ValidationError&) {
            keep[i] = 1;  // untestable subsamples stay in
        }
    });
    const auto kept = static_cast<int>(std::count(keep.begin(), keep.end(), 1));
    if (kept == 0) {
        spdlog::warn("Hotelling filter rejected all {} subsamples; using all of them", subs.size());
        std::fill(keep.begin(), keep.end(), 1);
    }
    parallel_for(subs.size(), [&](std::size_t i) {
        if (!keep[i]) return;
        const auto iv = indices::index_vector(subs[i].features, subs[i].labels, methods, derive_seed(seed, 0x6976, i),
                                              options.vector);
        predicted[i] = mapper::predict_fitness(bundle, iv);
    });
    std::vector<fitness::FitnessVector> survivors;
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (keep[i]) survivors.push_back(predicted[i]);
    Recommendation rec = rank(average(survivors), Mode::Subsampled);
    rec.n_subsamples_used = static_cast<int>(survivors.size());
    rec.n_subsamples_rejected = static_cast<int>(subs.size()) - kept;
    return rec;
}

Recommendation recommend(const mapper::MapperBundle& bundle, const data::Dataset& d, Mode mode, std::uint64_t seed,
                         const Options& options) {
    return mode == Mode::SingleShot ? recommend_single_shot(bundle, d, seed, options)
                                    : recommend_subsampled(bundle, d, seed, options);
}

std::vector<learners::ModelClass> top_k(const Recommendation& rec, int k) {
    if (k < 1 || k > static_cast<int>(rec.ranked.size())) throw ValidationError("k out of range: " + std::to_string(k));
    std::vector<learners::ModelClass> out;
    for (int i = 0; i < k; ++i) out.push_back(rec.ranked[static_cast<std::size_t>(i)].first);
    return out;
}

AutoMLResult automl_fit_predict(const mapper::MapperBundle& bundle, const data::Dataset& labeled,
                                const Matrix& unlabeled, std::uint64_t seed, const Options& options) {
    if (!labeled.has_both_classes()) throw ValidationError("labeled data needs both classes");
    if (unlabeled.rows() > 0 && unlabeled.cols() != labeled.features.cols())
        throw ValidationError("unlabeled data has " + std::to_string(unlabeled.cols()) + " columns, expected " +
                              std::to_string(labeled.features.cols()));
    AutoMLResult result;
    result.recommendation = recommend_subsampled(bundle, labeled, seed, options);
    result.top3 = top_k(result.recommendation, 3);
    result.column_stats = data::ColumnStats::fit(labeled.features);
    data::Dataset train = labeled;
    train.features = result.column_stats.apply(labeled.features);

    std::vector<learners::TunedClassifier> fitted(result.top3.size());
    parallel_for(result.top3.size(), [&](std::size_t i) {
        const auto c = result.top3[i];
        fitted[i] = learners::fit_tuned(c, train, options.folds,
                                        derive_seed(seed, 0x746f70, static_cast<std::uint64_t>(learners::index_of(c))),
                                        options.metric);
    });
    std::size_t best = 0;
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        result.top3_cv_f1.push_back(fitted[i].cv_f1);
        if (fitted[i].cv_f1 > fitted[best].cv_f1) best = i;
    }
    result.evaluated = result.top3;
    result.chosen = result.top3[best];
    result.cv_f1_of_chosen = fitted[best].cv_f1;
    result.model = std::move(fitted[best]);
    if (unlabeled.rows() > 0) result.predictions = learners::predict(result.model, result.column_stats.apply(unlabeled));
    return result;
}

std::string format_recommendation(const Recommendation& rec, int top) {
    const int shown = std::clamp(top, 1, static_cast<int>(rec.ranked.size()));
    std::string out = "rank  class               predicted_f1\n";
    char buf[128];
    for (int i = 0; i < shown; ++i) {
        const auto& [c, v] = rec.ranked[static_cast<std::size_t>(i)];
        std::snprintf(buf, sizeof buf, "%-5d %-19s %.6f\n", i + 1, learners::model_class_name(c).c_str(), v);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "mode: %s  subsamples used: %d  rejected: %d\n", mode_name(rec.mode).c_str(),
                  rec.n_subsamples_used, rec.n_subsamples_rejected);
    out += buf;
    return out;
}

}  // namespace ciams::recommend
