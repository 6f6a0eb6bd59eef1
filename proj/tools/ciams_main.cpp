#include "ciams/config.hpp"
#include "ciams/evaluate.hpp"
#include "ciams/indices.hpp"
#include "ciams/mapper.hpp"
#include "ciams/parallel.hpp"
#include "ciams/recommend.hpp"
#include "ciams/service.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>

using namespace ciams;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "key=value configuration file");
    cmd->add_option("--seed", c.seed, "random seed (overrides config and CIAMS_SEED)");
    cmd->add_option("--threads", c.threads, "worker threads, 0 = all cores");
    cmd->add_flag("-q,--quiet", c.quiet, "only warnings and errors on stderr");
}

app::Config resolve(const Common& c) {
    app::Config cfg;
    if (!c.config_path.empty()) app::apply_config_file(cfg, c.config_path);
    app::apply_environment(cfg);
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    set_thread_count(cfg.threads);
    if (c.quiet) spdlog::set_level(spdlog::level::warn);
    return cfg;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path);
    return out;
}

std::string utc_date() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_pattern("[%l] %v");
    spdlog::set_default_logger(spdlog::stderr_color_mt("ciams"));
    CLI::App cli{"Clustering-index based model class recommendation"};
    cli.require_subcommand(1);
    Common common;

    // train
    auto* train = cli.add_subcommand("train", "build the training table and fit the fitness regressors");
    std::string corpus_dir, model_out, table_out, table_in;
    train->add_option("--corpus", corpus_dir, "directory of labeled CSV datasets");
    train->add_option("--table", table_in, "reuse a table written by --table-out instead of --corpus");
    train->add_option("--out", model_out, "bundle path")->required();
    train->add_option("--table-out", table_out, "also write the training table CSV");
    add_common(train, common);

    // recommend
    auto* rec = cli.add_subcommand("recommend", "rank model classes for a dataset");
    std::string model_path, data_path, mode, csv_out;
    int top = 3;
    rec->add_option("--model", model_path)->required();
    rec->add_option("--data", data_path)->required();
    rec->add_option("--mode", mode, "subsampled or single-shot");
    rec->add_option("--top", top, "rows to print")->check(CLI::Range(1, 6));
    rec->add_option("--csv", csv_out, "also write rank,class,predicted_f1 to this file");
    add_common(rec, common);

    // fit-predict
    auto* fp = cli.add_subcommand("fit-predict", "tune the top three classes and label new rows");
    std::string labeled_path, unlabeled_path, preds_out;
    fp->add_option("--model", model_path)->required();
    fp->add_option("--labeled", labeled_path)->required();
    fp->add_option("--unlabeled", unlabeled_path)->required();
    fp->add_option("--out", preds_out)->required();
    add_common(fp, common);

    // evaluate
    auto* ev = cli.add_subcommand("evaluate", "dataset-level cross-validation of the whole pipeline");
    std::string report_out;
    std::optional<int> folds, repeats;
    ev->add_option("--corpus", corpus_dir);
    ev->add_option("--table", table_in, "evaluate on a table written by train --table-out");
    ev->add_option("--folds", folds);
    ev->add_option("--repeats", repeats);
    ev->add_option("--out", report_out, "report path (default: standard output)");
    add_common(ev, common);

    // indices
    auto* ix = cli.add_subcommand("indices", "print the index vector of a dataset");
    ix->add_option("--data", data_path)->required();
    ix->add_option("--out", csv_out, "write name,value CSV here instead of standard output");
    add_common(ix, common);

    // serve
    auto* sv = cli.add_subcommand("serve", "HTTP service");
    std::string bind = "127.0.0.1:8080";
    sv->add_option("--model", model_path)->required();
    sv->add_option("--bind", bind, "host:port");
    add_common(sv, common);

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        app::Config cfg = resolve(common);
        if (*train) {
            fitness::TrainingTable table;
            if (!table_in.empty()) {
                std::ifstream in(table_in);
                if (!in) throw ValidationError("cannot open " + table_in);
                table = fitness::read_table_csv(in);
            } else {
                if (corpus_dir.empty()) throw ValidationError("train needs --corpus or --table");
                const auto corpus = app::load_corpus(corpus_dir, app::load_options(cfg));
                spdlog::info("building training table from {} datasets", corpus.size());
                table = fitness::build_training_table(corpus, cfg.seed, app::table_options(cfg));
            }
            if (!table_out.empty()) {
                auto out = open_out(table_out);
                fitness::write_table_csv(table, out);
            }
            auto bundle = mapper::fit_mappers(table, cfg.mapper_folds, cfg.seed, app::mapper_options(cfg));
            std::string corpus_names;
            for (const auto& p : table.parents()) corpus_names += (corpus_names.empty() ? "" : ",") + p;
            bundle.training_meta = {{"corpus", corpus_names},
                                    {"seed", std::to_string(cfg.seed)},
                                    {"date", utc_date()},
                                    {"rows", std::to_string(table.rows.size())}};
            mapper::save_bundle(bundle, model_out);
            for (std::size_t k = 0; k < bundle.reports.size(); ++k) {
                const auto& r = bundle.reports[k];
                std::printf("%-19s cv_r2=%.4f depth=%d%s\n", learners::model_class_name(learners::kAllModelClasses[k]).c_str(),
                            r.cv_r2, r.best_depth, r.degenerate ? " (constant target)" : "");
            }
            for (auto c : learners::kAllModelClasses) {
                std::printf("top features for %s:\n", learners::model_class_name(c).c_str());
                for (const auto& f : app::feature_importance(bundle, table, c))
                    std::printf("  %-40s gain=%.6g spearman=%+.4f\n", f.feature.c_str(), f.gain, f.spearman);
            }
        } else if (*rec) {
            if (!mode.empty()) cfg.mode = recommend::parse_mode(mode);
            const auto bundle = mapper::load_bundle(model_path);
            const auto d = data::load_csv(data_path, app::load_options(cfg));
            const auto r = recommend::recommend(bundle, d, cfg.mode, cfg.seed, app::recommend_options(cfg));
            std::cout << recommend::format_recommendation(r, top);
            if (!csv_out.empty()) {
                auto out = open_out(csv_out);
                out << "rank,class,predicted_f1\n";
                for (std::size_t i = 0; i < r.ranked.size(); ++i)
                    out << i + 1 << ',' << learners::model_class_name(r.ranked[i].first) << ','
                        << fitness::format_double(r.ranked[i].second) << '\n';
            }
        } else if (*fp) {
            const auto bundle = mapper::load_bundle(model_path);
            const auto labeled = data::load_csv(labeled_path, app::load_options(cfg));
            const Matrix unlabeled = data::load_feature_csv(unlabeled_path, labeled.feature_names, labeled.label_name);
            const auto result = recommend::automl_fit_predict(bundle, labeled, unlabeled, cfg.seed, app::recommend_options(cfg));
            auto out = open_out(preds_out);
            out << labeled.label_name << '\n';
            for (int l : result.predictions) out << (l > 0 ? labeled.positive_symbol : labeled.negative_symbol) << '\n';
            std::printf("top3:");
            for (std::size_t i = 0; i < result.top3.size(); ++i)
                std::printf(" %s(cv_f1=%.4f)", learners::model_class_name(result.top3[i]).c_str(), result.top3_cv_f1[i]);
            std::printf("\nchosen: %s\n", learners::model_class_name(result.chosen).c_str());
        } else if (*ev) {
            if (folds) cfg.folds = *folds;
            if (repeats) cfg.repeats = *repeats;
            app::EvalReport report;
            if (!table_in.empty()) {
                std::ifstream in(table_in);
                if (!in) throw ValidationError("cannot open " + table_in);
                report = app::evaluate_table(fitness::read_table_csv(in), cfg);
            } else {
                if (corpus_dir.empty()) throw ValidationError("evaluate needs --corpus or --table");
                report = app::evaluate_corpus(corpus_dir, cfg);
            }
            const std::string text = app::report_json(report);
            if (report_out.empty()) {
                std::cout << text;
            } else {
                auto out = open_out(report_out);
                out << text;
            }
        } else if (*ix) {
            const auto d = data::load_csv(data_path, app::load_options(cfg));
            const auto iv = indices::index_vector(data::standardize(d.features), d.labels, cfg.methods, cfg.seed,
                                                  app::vector_options(cfg));
            std::ostringstream text;
            text << "index,value\n";
            for (std::size_t i = 0; i < iv.values.size(); ++i) text << iv.schema[i] << ',' << fitness::format_double(iv.values[i]) << '\n';
            if (csv_out.empty()) {
                std::cout << text.str();
            } else {
                auto out = open_out(csv_out);
                out << text.str();
            }
        } else if (*sv) {
            const auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw ValidationError("--bind must be host:port");
            int port = 0;
            try {
                port = std::stoi(bind.substr(colon + 1));
            } catch (const std::exception&) {
                throw ValidationError("bad port in --bind");
            }
            app::serve(model_path, bind.substr(0, colon), port, cfg);
        }
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("internal error: {}", e.what());
        return 2;
    }
    return 0;
}
