#pragma once

#include <optional>
#include <string>
#include <vector>

#include "taxalign/align.hpp"
#include "taxalign/embeddings.hpp"
#include "taxalign/error.hpp"
#include "taxalign/match.hpp"
#include "taxalign/taxonomy.hpp"

namespace taxalign {

struct SideConfig {
    std::string taxonomy_path;
    std::string scheme = "dotted"; // dotted | class-item, optional :depth
    std::string vectors_path;
    std::string translations_path; // optional
};

struct PipelineConfig {
    SideConfig source;
    SideConfig target;
    std::string method = "string"; // cosine|csls|string|hier-string|hier-vector|hier-csls
    std::string align_method = "procrustes"; // procrustes|vecmap|refine|self-learn
    std::string seed_dictionary_path; // optional
    std::string annotations_path;     // optional
    AlignmentConfig alignment;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
};

// Reads the JSON config file; `overrides` (flag values) win over file values.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> method;
};
PipelineConfig load_config(const std::string& path,
                           const ConfigOverrides& overrides = {});

Scheme parse_scheme(const std::string& spec);

struct IngestSummary {
    std::string scheme;
    std::size_t categories = 0;
    int max_depth = 0;
    std::vector<std::size_t> per_level;
};

// Loads and validates both taxonomies.
std::pair<IngestSummary, IngestSummary> cmd_ingest(const PipelineConfig& config);

// Full batch run: ingest, vectors, alignment (vector methods), matching and
// the optional evaluation; writes matches.tsv, skipped.txt, mapping.txt,
// eval.txt and manifest.txt under config.out_dir.
struct RunArtifacts {
    std::string matches_path;
    std::string manifest_path;
    std::size_t n_matches = 0;
    std::size_t n_skipped = 0;
};
RunArtifacts cmd_run(const PipelineConfig& config);

// Alignment stage only: builds both category-vector sets and writes
// mapping.txt under config.out_dir. Returns the mapping path.
std::string cmd_align(const PipelineConfig& config);

// Joint 2-D PCA of both category clouds (source mapped through W when a
// vector alignment is configured); writes coordinates.tsv.
std::string cmd_project(const PipelineConfig& config);

std::string config_fingerprint(const PipelineConfig& config);

} // namespace taxalign
