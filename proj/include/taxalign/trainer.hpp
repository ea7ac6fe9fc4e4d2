#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "taxalign/embeddings.hpp"
#include "taxalign/error.hpp"

namespace taxalign {

struct Corpus {
    std::vector<std::pair<std::string, std::vector<std::string>>> documents;
};

// One document per line: `doc-id<TAB>space-separated-tokens`.
Corpus load_corpus(const std::string& path);

enum class SoftmaxMode { full, negative_sampling };

struct TrainerConfig {
    int dim = 100;
    int window = 5;
    int epochs = 20;
    int negative_samples = 5;
    double lr_start = 0.025;
    double lr_end = 0.0001;
    int min_count = 1;
    std::uint64_t seed = 1;
    SoftmaxMode softmax_mode = SoftmaxMode::negative_sampling;
};

struct TrainResult {
    VectorTable vectors;        // word vectors (CBOW) or doc vectors (PV-DBOW)
    std::vector<double> loss_history; // mean loss per epoch (full softmax only)
};

// CBOW: predict each word from the mean of its window context; returns the
// input-matrix rows as embeddings. Deterministic for a fixed config and seed.
TrainResult train_cbow(const Corpus& corpus, const TrainerConfig& cfg);

// PV-DBOW: predict each word of a document from the document's own vector.
// The returned table is keyed by doc-id.
TrainResult train_pvdbow(const Corpus& corpus, const TrainerConfig& cfg);

// Analytic gradient of the full-softmax CBOW objective vs central finite
// differences on a random tiny model. Returns the max relative error.
// `zero_output` starts the output matrix at zero (uniform softmax), probing
// the linear-term gradient in isolation.
double gradient_check(const TrainerConfig& cfg, int vocab, int context_size,
                      std::uint64_t seed, bool zero_output = false);

} // namespace taxalign
