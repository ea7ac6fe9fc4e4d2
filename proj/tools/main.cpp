#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "taxalign/eval.hpp"
#include "taxalign/pipeline.hpp"
#include "taxalign/trainer.hpp"

namespace {

using namespace taxalign;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "config file");
    if (config_required) opt->required();
    cmd->add_option("--seed", [&flags](const CLI::results_t& res) {
        flags.seed = std::stoull(res[0]);
        return true;
    }, "seed override");
    cmd->add_option("--out", [&flags](const CLI::results_t& res) {
        flags.out_dir = res[0];
        return true;
    }, "output directory override");
}

PipelineConfig load(const CommonFlags& flags,
                    std::optional<std::string> method = std::nullopt) {
    ConfigOverrides overrides;
    overrides.seed = flags.seed;
    overrides.out_dir = flags.out_dir;
    overrides.method = method;
    return load_config(flags.config_path, overrides);
}

void print_summary(const IngestSummary& summary) {
    std::cout << summary.scheme << ": " << summary.categories
              << " categories, depth " << summary.max_depth << '\n';
    for (std::size_t level = 0; level < summary.per_level.size(); ++level) {
        std::cout << "  level " << level + 1 << ": " << summary.per_level[level]
                  << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-lingual taxonomy alignment pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;

    auto* ingest = app.add_subcommand("ingest", "load and summarize taxonomies");
    add_common(ingest, flags);

    auto* vectors = app.add_subcommand("vectors", "vector-table operations");
    vectors->require_subcommand(1);

    auto* vec_load = vectors->add_subcommand("load", "validate a vector file");
    std::string vec_file;
    vec_load->add_option("--file", vec_file, "word2vec text file")->required();

    auto* vec_train = vectors->add_subcommand("train", "train vectors on a corpus");
    std::string corpus_path, train_mode = "cbow", train_out;
    TrainerConfig trainer_cfg;
    bool full_softmax = false;
    vec_train->add_option("--corpus", corpus_path, "corpus file")->required();
    vec_train->add_option("--mode", train_mode, "cbow or pvdbow")
        ->check(CLI::IsMember({"cbow", "pvdbow"}));
    vec_train->add_option("--dim", trainer_cfg.dim, "embedding dimension");
    vec_train->add_option("--window", trainer_cfg.window, "window radius");
    vec_train->add_option("--epochs", trainer_cfg.epochs, "training epochs");
    vec_train->add_option("--negative", trainer_cfg.negative_samples,
                          "negative samples");
    vec_train->add_option("--min-count", trainer_cfg.min_count,
                          "vocabulary min count");
    vec_train->add_option("--train-seed", trainer_cfg.seed, "trainer seed");
    vec_train->add_flag("--full-softmax", full_softmax,
                        "use the full softmax objective");
    vec_train->add_option("--vectors-out", train_out, "output vector file")
        ->required();

    auto* vec_average = vectors->add_subcommand(
        "average", "averaged category vectors for one side");
    std::string avg_side = "source", avg_out;
    add_common(vec_average, flags);
    vec_average->add_option("--side", avg_side, "source or target")
        ->check(CLI::IsMember({"source", "target"}));
    vec_average->add_option("--vectors-out", avg_out, "output vector file")
        ->required();

    auto* align_cmd = app.add_subcommand("align", "learn a mapping");
    add_common(align_cmd, flags);

    auto* match_cmd =
        app.add_subcommand("match", "full run: match + optional eval");
    std::string method_flag;
    add_common(match_cmd, flags);
    match_cmd->add_option("--method", method_flag,
                          "cosine|csls|string|hier-string|hier-vector|hier-csls");

    auto* eval_cmd = app.add_subcommand("eval", "evaluation statistics");
    eval_cmd->require_subcommand(1);
    std::string ann_path, src_scheme = "dotted", tgt_scheme = "class-item";
    auto add_ann = [&](CLI::App* cmd) {
        cmd->add_option("--annotations", ann_path, "annotation file")->required();
        cmd->add_option("--source-scheme", src_scheme, "source scheme");
        cmd->add_option("--target-scheme", tgt_scheme, "target scheme");
    };
    auto* eval_accuracy = eval_cmd->add_subcommand("accuracy", "accuracy report");
    add_ann(eval_accuracy);
    auto* eval_screen = eval_cmd->add_subcommand("screen", "first-k screening");
    add_ann(eval_screen);
    long screen_k = 50;
    double screen_threshold = 0.01;
    eval_screen->add_option("--k", screen_k, "screening window");
    eval_screen->add_option("--threshold", screen_threshold,
                            "accuracy threshold");
    auto* eval_fisher = eval_cmd->add_subcommand("fisher", "Fisher's exact test");
    std::vector<long> fisher_counts;
    eval_fisher
        ->add_option("--table", fisher_counts,
                     "counts a b c d of the 2x2 table")
        ->expected(4)
        ->required();

    auto* project = app.add_subcommand("project", "2-D PCA coordinates");
    add_common(project, flags);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto [source, target] = cmd_ingest(load(flags));
            print_summary(source);
            print_summary(target);
        } else if (*vec_load) {
            VectorTable table = load_vectors(vec_file);
            std::cout << table.size() << " vectors, dim " << table.dim()
                      << ", duplicates dropped " << table.duplicates_dropped
                      << '\n';
        } else if (*vec_train) {
            trainer_cfg.softmax_mode = full_softmax
                                           ? SoftmaxMode::full
                                           : SoftmaxMode::negative_sampling;
            Corpus corpus = load_corpus(corpus_path);
            TrainResult result = train_mode == "cbow"
                                     ? train_cbow(corpus, trainer_cfg)
                                     : train_pvdbow(corpus, trainer_cfg);
            save_vectors(result.vectors, train_out);
            std::cout << "trained " << result.vectors.size() << " vectors, dim "
                      << trainer_cfg.dim << '\n';
            if (!result.loss_history.empty()) {
                std::cout << "final epoch loss " << result.loss_history.back()
                          << '\n';
            }
        } else if (*vec_average) {
            PipelineConfig config = load(flags);
            const SideConfig& side =
                avg_side == "source" ? config.source : config.target;
            Taxonomy taxonomy =
                load_taxonomy(side.taxonomy_path, parse_scheme(side.scheme));
            if (!side.translations_path.empty()) {
                taxonomy = apply_translations(taxonomy, side.translations_path);
            }
            VectorTable table = load_vectors(side.vectors_path);
            CategoryVectorSet set = build_category_vectors(taxonomy, table);
            VectorTable out;
            out.matrix = set.matrix;
            for (const auto& code : set.codes) out.tokens.push_back(code.raw);
            save_vectors(out, avg_out);
            std::cout << set.size() << " category vectors ("
                      << set.uncovered().size() << " uncovered)\n";
        } else if (*align_cmd) {
            std::string path = cmd_align(load(flags));
            std::cout << "mapping written to " << path << '\n';
        } else if (*match_cmd) {
            std::optional<std::string> method;
            if (!method_flag.empty()) method = method_flag;
            RunArtifacts artifacts = cmd_run(load(flags, method));
            std::cout << artifacts.n_matches << " matches ("
                      << artifacts.n_skipped << " skipped) -> "
                      << artifacts.matches_path << '\n';
        } else if (*eval_accuracy || *eval_screen) {
            auto annotations =
                load_annotations(ann_path, parse_scheme(src_scheme),
                                 parse_scheme(tgt_scheme));
            if (*eval_accuracy) {
                std::cout << format_report(accuracy(annotations));
            } else {
                ScreenResult result =
                    screen_first_k(annotations, screen_k, screen_threshold);
                std::cout << "window: " << result.window << '\n'
                          << "head_accuracy: " << result.head_accuracy << '\n'
                          << "dropped: " << (result.dropped ? "yes" : "no")
                          << '\n';
            }
        } else if (*eval_fisher) {
            ContingencyTable table{fisher_counts[0], fisher_counts[1],
                                   fisher_counts[2], fisher_counts[3]};
            FisherResult result = fisher_exact(table);
            std::cout.precision(12);
            std::cout << "p: " << result.p << '\n';
            if (result.degenerate) std::cout << "degenerate: yes\n";
        } else if (*project) {
            std::string path = cmd_project(load(flags));
            std::cout << "coordinates written to " << path << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
