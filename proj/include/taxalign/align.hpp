#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "taxalign/csls.hpp"
#include "taxalign/embeddings.hpp"
#include "taxalign/error.hpp"

namespace taxalign {

// Known (source row, target row) anchors. Many-to-one is allowed in both
// directions.
struct SeedDictionary {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    std::vector<double> weights; // empty = all 1

    std::size_t size() const { return pairs.size(); }
    double weight(std::size_t i) const {
        return weights.empty() ? 1.0 : weights[i];
    }
};

// Orthogonal map W between the two spaces; applied to row vectors as X * W^T.
struct MappingMatrix {
    Eigen::MatrixXd W;
    std::string method;
    int iterations = 0;
    std::vector<double> objective_history;
};

struct AlignmentConfig {
    int refinement_iterations = 5;
    int csls_k = 10;
    bool whitening = false;
    std::vector<NormalizeStep> normalization{
        NormalizeStep::unit, NormalizeStep::center, NormalizeStep::unit};
    double convergence_tol = 1e-6;
    std::uint64_t seed = 1;
    int restarts = 3; // self-learning only
};

// W = U V^T from SVD(sum_pairs w y x^T); minimizes sum ||W x - y||^2 over
// orthogonal W.
MappingMatrix procrustes_solve(const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y,
                               const SeedDictionary& dict);

// Joint transform from SVD(X_d^T Y_d) = U S V^T: X' = X U, Y' = Y V.
struct VecmapResult {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
};
VecmapResult vecmap_transform(const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y,
                              const SeedDictionary& dict);

enum class InductionMode { forward, mutual };

// Pairs rows across the two (already mapped) spaces by argmax under the
// scorer. Zero rows are excluded. Ties break to the lowest target index.
SeedDictionary induce_dictionary(const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& Y, Scorer scorer,
                                 InductionMode mode, int csls_k = 10);

// Alternates procrustes_solve and CSLS forward induction; returns the W with
// the best mean dictionary score across rounds.
MappingMatrix refine(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const SeedDictionary& seed, const AlignmentConfig& cfg);

// Fully unsupervised: initial dictionary from sorted intra-space similarity
// profiles, then refine; seeded restarts keep the best-scoring run.
MappingMatrix self_learn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const AlignmentConfig& cfg);

// Mean CSLS score of the forward-induced dictionary under mapping W.
double mean_csls_score(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const Eigen::MatrixXd& W, int csls_k);

void save_mapping(const MappingMatrix& mapping, const std::string& path);
MappingMatrix load_mapping(const std::string& path);

// `source_code<TAB>target_code` lines resolved to row indices.
SeedDictionary load_seed_dictionary(const std::string& path,
                                    const CategoryVectorSet& source,
                                    const CategoryVectorSet& target);

} // namespace taxalign
