#include "taxalign/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "taxalign/eval.hpp"

namespace taxalign {

namespace fs = std::filesystem;
using nlohmann::json;

Scheme parse_scheme(const std::string& spec) {
    std::string name = spec;
    int depth = 0;
    std::size_t colon = spec.find(':');
    if (colon != std::string::npos) {
        name = spec.substr(0, colon);
        depth = std::stoi(spec.substr(colon + 1));
    }
    if (name == "dotted") return Scheme::dotted(spec, depth);
    if (name == "class-item") return Scheme::class_item(spec, depth);
    if (name == "okpd2") return Scheme::dotted("okpd2", 4);
    if (name == "nigp5") return Scheme::class_item("nigp5", 2);
    throw ConfigError("unknown scheme '" + spec + "'");
}

namespace {

SideConfig parse_side(const json& j) {
    SideConfig side;
    side.taxonomy_path = j.at("taxonomy").get<std::string>();
    if (j.contains("scheme")) side.scheme = j["scheme"].get<std::string>();
    if (j.contains("vectors")) side.vectors_path = j["vectors"].get<std::string>();
    if (j.contains("translations")) {
        side.translations_path = j["translations"].get<std::string>();
    }
    return side;
}

void require_exists(const std::string& path, const std::string& what) {
    if (path.empty()) return;
    if (!fs::exists(path)) {
        throw ConfigError(what + " file does not exist: " + path);
    }
}

Taxonomy load_side_taxonomy(const SideConfig& side) {
    Taxonomy taxonomy = load_taxonomy(side.taxonomy_path,
                                      parse_scheme(side.scheme));
    if (!side.translations_path.empty()) {
        return apply_translations(taxonomy, side.translations_path);
    }
    return taxonomy;
}

// Normalization/whitening restricted to the usable rows; masked rows stay
// zero so the coverage invariant holds.
void transform_usable(CategoryVectorSet& set,
                      const std::vector<NormalizeStep>& steps, bool whitening) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < set.mask.size(); ++i) {
        if (set.mask[i]) rows.push_back(static_cast<Eigen::Index>(i));
    }
    if (rows.empty()) return;
    Eigen::MatrixXd usable(static_cast<Eigen::Index>(rows.size()), set.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        usable.row(i) = set.matrix.row(rows[i]);
    }
    if (!steps.empty()) usable = normalize(usable, steps);
    if (whitening) usable = whiten(usable, 1e-8).whitened;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        set.matrix.row(rows[i]) = usable.row(i);
    }
}

bool is_vector_method(const std::string& method) {
    return method == "cosine" || method == "csls" || method == "hier-vector" ||
           method == "hier-csls";
}

struct AlignedSpaces {
    MappingMatrix mapping;
};

// Runs the configured alignment. Vecmap rewrites both category matrices in
// place and hands back the identity map.
AlignedSpaces run_alignment(const PipelineConfig& config,
                            CategoryVectorSet& source,
                            CategoryVectorSet& target) {
    AlignedSpaces aligned;
    SeedDictionary dict;
    if (!config.seed_dictionary_path.empty()) {
        dict = load_seed_dictionary(config.seed_dictionary_path, source,
                                    target);
    }

    AlignmentConfig cfg = config.alignment;
    cfg.seed = config.seed;

    if (config.align_method == "procrustes") {
        if (dict.pairs.empty()) {
            throw ConfigError("procrustes alignment needs a seed dictionary");
        }
        aligned.mapping = procrustes_solve(source.matrix, target.matrix, dict);
    } else if (config.align_method == "refine") {
        if (dict.pairs.empty()) {
            throw ConfigError("refine alignment needs a seed dictionary");
        }
        aligned.mapping = refine(source.matrix, target.matrix, dict, cfg);
    } else if (config.align_method == "self-learn") {
        aligned.mapping = self_learn(source.matrix, target.matrix, cfg);
    } else if (config.align_method == "vecmap") {
        if (dict.pairs.empty()) {
            throw ConfigError("vecmap alignment needs a seed dictionary");
        }
        VecmapResult transformed =
            vecmap_transform(source.matrix, target.matrix, dict);
        source.matrix = transformed.X;
        target.matrix = transformed.Y;
        aligned.mapping.W =
            Eigen::MatrixXd::Identity(source.dim(), source.dim());
        aligned.mapping.method = "vecmap";
        aligned.mapping.iterations = 1;
    } else {
        throw ConfigError("unknown alignment method '" + config.align_method +
                          "'");
    }
    return aligned;
}

void write_skip_report(const std::vector<CategoryCode>& skipped,
                       const std::string& path) {
    std::ofstream out(path);
    for (const auto& code : skipped) out << code.raw << '\n';
}

} // namespace

PipelineConfig load_config(const std::string& path,
                           const ConfigOverrides& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }

    PipelineConfig config;
    try {
        config.source = parse_side(j.at("source"));
        config.target = parse_side(j.at("target"));
        if (j.contains("method")) config.method = j["method"].get<std::string>();
        if (j.contains("seed")) config.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out")) config.out_dir = j["out"].get<std::string>();
        if (j.contains("seed_dictionary")) {
            config.seed_dictionary_path = j["seed_dictionary"].get<std::string>();
        }
        if (j.contains("annotations")) {
            config.annotations_path = j["annotations"].get<std::string>();
        }
        if (j.contains("align")) {
            const json& a = j["align"];
            if (a.contains("method")) {
                config.align_method = a["method"].get<std::string>();
            }
            if (a.contains("refinement_iterations")) {
                config.alignment.refinement_iterations =
                    a["refinement_iterations"].get<int>();
            }
            if (a.contains("csls_k")) {
                config.alignment.csls_k = a["csls_k"].get<int>();
            }
            if (a.contains("whitening")) {
                config.alignment.whitening = a["whitening"].get<bool>();
            }
            if (a.contains("normalization")) {
                config.alignment.normalization = parse_normalize_steps(
                    a["normalization"].get<std::string>());
            }
            if (a.contains("convergence_tol")) {
                config.alignment.convergence_tol =
                    a["convergence_tol"].get<double>();
            }
            if (a.contains("restarts")) {
                config.alignment.restarts = a["restarts"].get<int>();
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }

    if (overrides.seed) config.seed = *overrides.seed;
    if (overrides.out_dir) config.out_dir = *overrides.out_dir;
    if (overrides.method) config.method = *overrides.method;

    require_exists(config.source.taxonomy_path, "source taxonomy");
    require_exists(config.target.taxonomy_path, "target taxonomy");
    require_exists(config.source.vectors_path, "source vectors");
    require_exists(config.target.vectors_path, "target vectors");
    require_exists(config.source.translations_path, "source translations");
    require_exists(config.target.translations_path, "target translations");
    require_exists(config.seed_dictionary_path, "seed dictionary");
    require_exists(config.annotations_path, "annotations");

    static const char* known_methods[] = {"cosine",      "csls",
                                          "string",      "hier-string",
                                          "hier-vector", "hier-csls"};
    if (std::find(std::begin(known_methods), std::end(known_methods),
                  config.method) == std::end(known_methods)) {
        throw ConfigError("unknown method '" + config.method + "'");
    }
    return config;
}

std::string config_fingerprint(const PipelineConfig& config) {
    std::ostringstream canon;
    canon << config.source.taxonomy_path << '|' << config.source.scheme << '|'
          << config.source.vectors_path << '|'
          << config.source.translations_path << '|'
          << config.target.taxonomy_path << '|' << config.target.scheme << '|'
          << config.target.vectors_path << '|'
          << config.target.translations_path << '|' << config.method << '|'
          << config.align_method << '|' << config.seed_dictionary_path << '|'
          << config.annotations_path << '|'
          << config.alignment.refinement_iterations << '|'
          << config.alignment.csls_k << '|' << config.alignment.whitening
          << '|' << config.alignment.convergence_tol << '|'
          << config.alignment.restarts << '|' << config.seed;
    for (NormalizeStep step : config.alignment.normalization) {
        canon << '|' << static_cast<int>(step);
    }
    // FNV-1a over the canonical field string.
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : canon.str()) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    std::ostringstream hex;
    hex << std::hex << hash;
    return hex.str();
}

std::pair<IngestSummary, IngestSummary> cmd_ingest(
    const PipelineConfig& config) {
    auto summarize = [](const Taxonomy& taxonomy) {
        IngestSummary summary;
        summary.scheme = taxonomy.scheme().id;
        summary.categories = taxonomy.size();
        summary.max_depth = taxonomy.max_depth();
        for (int level = 1; level <= taxonomy.max_depth(); ++level) {
            summary.per_level.push_back(taxonomy.level_slice(level).size());
        }
        return summary;
    };
    Taxonomy source = load_side_taxonomy(config.source);
    Taxonomy target = load_side_taxonomy(config.target);
    return {summarize(source), summarize(target)};
}

RunArtifacts cmd_run(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    RunArtifacts artifacts;
    std::vector<std::string> outputs;

    Taxonomy source_taxonomy = load_side_taxonomy(config.source);
    Taxonomy target_taxonomy = load_side_taxonomy(config.target);

    MatchResult matches;
    bool has_mapping = false;
    MappingMatrix mapping;

    if (config.method == "string" || config.method == "hier-string") {
        auto source_bags = build_token_bags(source_taxonomy);
        auto target_bags = build_token_bags(target_taxonomy);
        if (config.method == "string") {
            matches = match_strings(source_bags, target_bags);
        } else {
            MatchInputs inputs;
            inputs.source_bags = &source_bags;
            inputs.target_bags = &target_bags;
            matches = hierarchical_match(source_taxonomy, target_taxonomy,
                                         BaseMatcher::string_sim, inputs);
        }
    } else {
        if (config.source.vectors_path.empty() ||
            config.target.vectors_path.empty()) {
            throw ConfigError("method '" + config.method +
                              "' needs vector files on both sides");
        }
        VectorTable source_table = load_vectors(config.source.vectors_path);
        VectorTable target_table = load_vectors(config.target.vectors_path);
        CategoryVectorSet source_set =
            build_category_vectors(source_taxonomy, source_table);
        CategoryVectorSet target_set =
            build_category_vectors(target_taxonomy, target_table);
        transform_usable(source_set, config.alignment.normalization,
                         config.alignment.whitening);
        transform_usable(target_set, config.alignment.normalization,
                         config.alignment.whitening);

        AlignedSpaces aligned = run_alignment(config, source_set, target_set);
        mapping = aligned.mapping;
        has_mapping = true;

        if (config.method == "cosine" || config.method == "csls") {
            matches = match_vectors(source_set, target_set, mapping,
                                    config.method == "cosine" ? Scorer::cosine
                                                              : Scorer::csls,
                                    config.alignment.csls_k);
        } else {
            MatchInputs inputs;
            inputs.source_vectors = &source_set;
            inputs.target_vectors = &target_set;
            inputs.mapping = &mapping;
            inputs.csls_k = config.alignment.csls_k;
            matches = hierarchical_match(
                source_taxonomy, target_taxonomy,
                config.method == "hier-vector" ? BaseMatcher::cosine
                                               : BaseMatcher::csls,
                inputs);
        }
    }

    artifacts.matches_path = (fs::path(config.out_dir) / "matches.tsv").string();
    save_matches(matches, artifacts.matches_path);
    outputs.push_back("matches.tsv");
    artifacts.n_matches = matches.records.size();
    artifacts.n_skipped = matches.skipped.size();

    write_skip_report(matches.skipped,
                      (fs::path(config.out_dir) / "skipped.txt").string());
    outputs.push_back("skipped.txt");

    if (has_mapping) {
        save_mapping(mapping,
                     (fs::path(config.out_dir) / "mapping.txt").string());
        outputs.push_back("mapping.txt");
    }

    if (!config.annotations_path.empty()) {
        auto annotations = load_annotations(
            config.annotations_path, parse_scheme(config.source.scheme),
            parse_scheme(config.target.scheme));
        EvalReport report = accuracy(annotations);
        ScreenResult screen = screen_first_k(annotations);
        std::ofstream eval_out(fs::path(config.out_dir) / "eval.txt");
        eval_out << format_report(report);
        eval_out << "screen_dropped: " << (screen.dropped ? "yes" : "no")
                 << '\n';
        outputs.push_back("eval.txt");
    }

    artifacts.manifest_path =
        (fs::path(config.out_dir) / "manifest.txt").string();
    std::ofstream manifest(artifacts.manifest_path);
    manifest << "config_fingerprint: " << config_fingerprint(config) << '\n';
    manifest << "seed: " << config.seed << '\n';
    manifest << "method: " << config.method << '\n';
    manifest << "outputs:";
    for (const auto& name : outputs) manifest << ' ' << name;
    manifest << '\n';
    return artifacts;
}

std::string cmd_align(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    if (config.source.vectors_path.empty() ||
        config.target.vectors_path.empty()) {
        throw ConfigError("align needs vector files on both sides");
    }
    Taxonomy source_taxonomy = load_side_taxonomy(config.source);
    Taxonomy target_taxonomy = load_side_taxonomy(config.target);
    VectorTable source_table = load_vectors(config.source.vectors_path);
    VectorTable target_table = load_vectors(config.target.vectors_path);
    CategoryVectorSet source_set =
        build_category_vectors(source_taxonomy, source_table);
    CategoryVectorSet target_set =
        build_category_vectors(target_taxonomy, target_table);
    transform_usable(source_set, config.alignment.normalization,
                     config.alignment.whitening);
    transform_usable(target_set, config.alignment.normalization,
                     config.alignment.whitening);

    AlignedSpaces aligned = run_alignment(config, source_set, target_set);
    std::string path = (fs::path(config.out_dir) / "mapping.txt").string();
    save_mapping(aligned.mapping, path);
    return path;
}

std::string cmd_project(const PipelineConfig& config) {
    fs::create_directories(config.out_dir);
    if (config.source.vectors_path.empty() ||
        config.target.vectors_path.empty()) {
        throw ConfigError("project needs vector files on both sides");
    }

    Taxonomy source_taxonomy = load_side_taxonomy(config.source);
    Taxonomy target_taxonomy = load_side_taxonomy(config.target);
    VectorTable source_table = load_vectors(config.source.vectors_path);
    VectorTable target_table = load_vectors(config.target.vectors_path);
    CategoryVectorSet source_set =
        build_category_vectors(source_taxonomy, source_table);
    CategoryVectorSet target_set =
        build_category_vectors(target_taxonomy, target_table);
    transform_usable(source_set, config.alignment.normalization,
                     config.alignment.whitening);
    transform_usable(target_set, config.alignment.normalization,
                     config.alignment.whitening);

    // Reuse a mapping from an earlier align/run step when one is present.
    fs::path mapping_path = fs::path(config.out_dir) / "mapping.txt";
    if (fs::exists(mapping_path)) {
        MappingMatrix mapping = load_mapping(mapping_path.string());
        source_set.matrix = source_set.matrix * mapping.W.transpose();
    }

    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<Eigen::RowVectorXd> rows;
    for (std::size_t i = 0; i < source_set.codes.size(); ++i) {
        if (!source_set.mask[i]) continue;
        labels.emplace_back(source_set.scheme, source_set.codes[i].raw);
        rows.push_back(source_set.matrix.row(static_cast<Eigen::Index>(i)));
    }
    for (std::size_t j = 0; j < target_set.codes.size(); ++j) {
        if (!target_set.mask[j]) continue;
        labels.emplace_back(target_set.scheme, target_set.codes[j].raw);
        rows.push_back(target_set.matrix.row(static_cast<Eigen::Index>(j)));
    }
    if (rows.size() < 2) {
        throw DataError("project: fewer than 2 usable category vectors");
    }

    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(rows.size()),
                            source_set.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        stacked.row(static_cast<Eigen::Index>(i)) = rows[i];
    }
    PcaResult pca = pca_project(stacked, 2);

    std::string path = (fs::path(config.out_dir) / "coordinates.tsv").string();
    std::ofstream out(path);
    out.precision(12);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out << labels[i].first << '\t' << labels[i].second << '\t'
            << pca.coords(static_cast<Eigen::Index>(i), 0) << '\t'
            << pca.coords(static_cast<Eigen::Index>(i), 1) << '\n';
    }
    out << "# explained_variance " << pca.explained_variance(0) << ' '
        << pca.explained_variance(1) << '\n';
    return path;
}

} // namespace taxalign
