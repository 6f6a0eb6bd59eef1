#include "ciams/evaluate.hpp"

#include "ciams/parallel.hpp"
#include "ciams/recommend.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

namespace ciams::app {

namespace {

std::vector<learners::ModelClass> top3_of(const fitness::FitnessVector& v) {
    return recommend::top_k(recommend::rank(v, recommend::Mode::Subsampled), 3);
}

// Rounded so the report text does not depend on the last bits of a sum.
double r(double x) {
    if (!std::isfinite(x)) return 0.0;
    return std::round(x * 1e9) / 1e9;
}

}  // namespace

EvalReport evaluate_corpus(const std::vector<data::Dataset>& corpus, const Config& cfg) {
    if (corpus.size() < static_cast<std::size_t>(cfg.folds))
        throw ValidationError("corpus has " + std::to_string(corpus.size()) + " datasets, fewer than folds=" +
                              std::to_string(cfg.folds));
    set_thread_count(cfg.threads);
    // Subsample rows do not depend on the fold layout, so each dataset is scored once.
    spdlog::info("scoring subsamples of {} datasets", corpus.size());
    return evaluate_table(fitness::build_training_table(corpus, cfg.seed, table_options(cfg)), cfg);
}

EvalReport evaluate_table(const fitness::TrainingTable& all, const Config& cfg) {
    const std::vector<std::string> names = all.parents();
    const auto n = static_cast<int>(names.size());
    if (n < cfg.folds) throw ValidationError("table has " + std::to_string(n) + " datasets, fewer than folds=" +
                                             std::to_string(cfg.folds));
    set_thread_count(cfg.threads);
    std::vector<std::vector<std::size_t>> rows_of(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < all.rows.size(); ++i) {
        const auto it = std::find(names.begin(), names.end(), all.rows[i].parent);
        rows_of[static_cast<std::size_t>(it - names.begin())].push_back(i);
    }

    EvalReport report;
    report.configuration = describe(cfg);
    std::array<std::vector<double>, kClasses> pooled_true, pooled_pred;
    for (int rep = 0; rep < cfg.repeats; ++rep) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x726570, static_cast<std::uint64_t>(rep)));
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> fold_of(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % cfg.folds;
        int hits = 0;
        for (int f = 0; f < cfg.folds; ++f) {
            fitness::TrainingTable train;
            train.schema = all.schema;
            std::vector<int> held;
            for (int d = 0; d < n; ++d) {
                if (fold_of[static_cast<std::size_t>(d)] == f) {
                    held.push_back(d);
                    continue;
                }
                for (std::size_t i : rows_of[static_cast<std::size_t>(d)]) train.rows.push_back(all.rows[i]);
            }
            spdlog::info("repeat {} fold {}: mapper on {} rows, {} held-out datasets", rep, f, train.rows.size(), held.size());
            const auto bundle = mapper::fit_mappers(train, cfg.mapper_folds,
                                                    derive_seed(cfg.seed, 0x6d6170, static_cast<std::uint64_t>(rep * 1000 + f)),
                                                    mapper_options(cfg));
            for (int d : held) {
                HeldOut h;
                h.dataset = names[static_cast<std::size_t>(d)];
                h.repeat = rep;
                h.fold = f;
                const auto& idx = rows_of[static_cast<std::size_t>(d)];
                std::vector<fitness::FitnessVector> truth, pred, pred_used;
                for (std::size_t i : idx) {
                    const auto& row = all.rows[i];
                    indices::IndexVector iv{row.features, all.schema, row.subsample_ref};
                    truth.push_back(row.fitness);
                    pred.push_back(mapper::predict_fitness(bundle, iv));
                    if (row.representative) pred_used.push_back(pred.back());
                }
                if (pred_used.empty()) pred_used = pred;
                h.subsamples = static_cast<int>(idx.size());
                h.subsamples_used = static_cast<int>(pred_used.size());
                h.true_fitness = recommend::average(truth);
                h.predicted_fitness = recommend::average(pred_used);
                for (std::size_t k = 0; k < kClasses; ++k) {
                    std::vector<double> e, p;
                    for (std::size_t s = 0; s < truth.size(); ++s) {
                        e.push_back(truth[s][k]);
                        p.push_back(pred[s][k]);
                    }
                    h.mae[k] = stats::mae(e, p);
                    h.tests[k] = stats::meandiff_test(e, p, 0.1, 0.05);
                    pooled_true[k].insert(pooled_true[k].end(), e.begin(), e.end());
                    pooled_pred[k].insert(pooled_pred[k].end(), p.begin(), p.end());
                }
                h.true_top3 = top3_of(h.true_fitness);
                h.predicted_top3 = top3_of(h.predicted_fitness);
                h.top1_in_top3 = std::find(h.predicted_top3.begin(), h.predicted_top3.end(), h.true_top3.front()) !=
                                 h.predicted_top3.end();
                hits += h.top1_in_top3 ? 1 : 0;
                report.held_out.push_back(std::move(h));
            }
        }
        report.hits_per_repeat.push_back(hits);
    }
    std::sort(report.held_out.begin(), report.held_out.end(), [](const HeldOut& a, const HeldOut& b) {
        return std::tie(a.repeat, a.dataset) < std::tie(b.repeat, b.dataset);
    });

    for (std::size_t k = 0; k < kClasses; ++k) {
        double var = 0.0;
        const double mean_true =
            std::accumulate(pooled_true[k].begin(), pooled_true[k].end(), 0.0) / static_cast<double>(pooled_true[k].size());
        for (double v : pooled_true[k]) var += (v - mean_true) * (v - mean_true);
        report.per_class_r2[k] = var > 0 ? stats::r2_score(pooled_true[k], pooled_pred[k]) : 0.0;
        std::vector<double> maes;
        for (const auto& h : report.held_out) {
            maes.push_back(h.mae[k]);
            if (h.tests[k].pass) ++report.pass_counts[k];
        }
        const double m = std::accumulate(maes.begin(), maes.end(), 0.0) / static_cast<double>(maes.size());
        double sd = 0.0;
        for (double v : maes) sd += (v - m) * (v - m);
        sd = maes.size() > 1 ? std::sqrt(sd / static_cast<double>(maes.size() - 1)) : 0.0;
        report.per_class_mae[k] = {m, sd};
    }
    int hits = 0;
    for (const auto& h : report.held_out) {
        hits += h.top1_in_top3 ? 1 : 0;
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t p = 0; p < 3; ++p)
                if (h.true_top3[t] == h.predicted_top3[p]) ++report.rank_confusion[t][p];
    }
    report.top1_in_top3_recall = report.held_out.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(report.held_out.size());
    return report;
}

EvalReport evaluate_corpus(const std::string& corpus_dir, const Config& cfg) {
    return evaluate_corpus(load_corpus(corpus_dir, load_options(cfg)), cfg);
}

std::string report_json(const EvalReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : report.configuration) cfg[k] = v;
    j["configuration"] = cfg;
    ordered_json classes = ordered_json::array();
    for (std::size_t k = 0; k < kClasses; ++k) {
        classes.push_back({{"class", learners::model_class_name(learners::kAllModelClasses[k])},
                           {"r2", r(report.per_class_r2[k])},
                           {"mae_mean", r(report.per_class_mae[k].first)},
                           {"mae_std", r(report.per_class_mae[k].second)},
                           {"pass_count", report.pass_counts[k]}});
    }
    j["per_class"] = classes;
    j["rank_confusion"] = report.rank_confusion;
    j["top1_in_top3_recall"] = r(report.top1_in_top3_recall);
    j["hits_per_repeat"] = report.hits_per_repeat;
    ordered_json held = ordered_json::array();
    auto names = [](const std::vector<learners::ModelClass>& v) {
        std::vector<std::string> out;
        for (auto c : v) out.push_back(learners::model_class_name(c));
        return out;
    };
    for (const auto& h : report.held_out) {
        ordered_json tf = ordered_json::array(), pf = ordered_json::array(), mae = ordered_json::array(),
                     tests = ordered_json::array();
        for (std::size_t k = 0; k < kClasses; ++k) {
            tf.push_back(r(h.true_fitness[k]));
            pf.push_back(r(h.predicted_fitness[k]));
            mae.push_back(r(h.mae[k]));
            tests.push_back({{"statistic", r(h.tests[k].statistic)},
                             {"p_value", r(h.tests[k].p_value)},
                             {"test", h.tests[k].test_kind == stats::TestKind::T ? "t" : "Z"},
                             {"pass", h.tests[k].pass}});
        }
        held.push_back({{"dataset", h.dataset},
                        {"repeat", h.repeat},
                        {"fold", h.fold},
                        {"subsamples", h.subsamples},
                        {"subsamples_used", h.subsamples_used},
                        {"true_fitness", tf},
                        {"predicted_fitness", pf},
                        {"mae", mae},
                        {"meandiff_tests", tests},
                        {"true_top3", names(h.true_top3)},
                        {"predicted_top3", names(h.predicted_top3)},
                        {"top1_in_top3", h.top1_in_top3}});
    }
    j["held_out"] = held;
    return j.dump(2) + "\n";
}

std::vector<FeatureImportance> feature_importance(const mapper::MapperBundle& bundle, const fitness::TrainingTable& table,
                                                  learners::ModelClass c, std::size_t top) {
    if (table.rows.empty()) throw ValidationError("empty training table");
    if (table.schema != bundle.schema) throw ValidationError("schema mismatch between bundle and table");
    const auto& g = bundle.regressors[static_cast<std::size_t>(learners::index_of(c))];
    std::vector<std::size_t> order(bundle.schema.size());
    std::iota(order.begin(), order.end(), 0);
    auto gain = [&](std::size_t j) { return j < g.feature_gain.size() ? g.feature_gain[j] : 0.0; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gain(a) > gain(b); });
    const Vector target = table.target(c);
    const std::vector<double> y(target.data(), target.data() + target.size());
    std::vector<FeatureImportance> out;
    for (std::size_t i = 0; i < std::min(top, order.size()); ++i) {
        const std::size_t j = order[i];
        std::vector<double> col;
        for (const auto& row : table.rows) col.push_back(row.features[j]);
        out.push_back({bundle.schema[j], gain(j), y.size() >= 3 ? stats::spearman(col, y) : 0.0});
    }
    return out;
}

}  // namespace ciams::app
