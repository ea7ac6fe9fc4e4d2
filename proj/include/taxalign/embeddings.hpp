#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <vector>

#include "taxalign/error.hpp"
#include "taxalign/taxonomy.hpp"

namespace taxalign {

// Token-indexed dense vector matrix (word2vec text format on disk).
struct VectorTable {
    std::vector<std::string> tokens;
    Eigen::MatrixXd matrix; // |V| x d
    std::unordered_map<std::string, Eigen::Index> index;
    long duplicates_dropped = 0;

    Eigen::Index dim() const { return matrix.cols(); }
    Eigen::Index size() const { return matrix.rows(); }

    bool has(const std::string& token) const { return index.count(token) > 0; }
    Eigen::Index row_of(const std::string& token) const;

    static VectorTable from_rows(
        const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows);
};

VectorTable load_vectors(const std::string& path);
void save_vectors(const VectorTable& table, const std::string& path);

// Lowercased maximal runs of Unicode alphanumeric characters.
std::vector<std::string> tokenize(const std::string& text);

// Mean of in-vocabulary token vectors; zero vector and covered=false when
// nothing is in vocabulary.
struct AveragedVector {
    Eigen::VectorXd vector;
    bool covered = false;
};
AveragedVector average_tokens(const std::vector<std::string>& tokens,
                              const VectorTable& table);

// Taxonomy-aligned matrix of category vectors. Rows follow codes order;
// mask[i] is false (and the row zero) when no description token was in
// vocabulary.
struct CategoryVectorSet {
    std::string scheme;
    std::vector<CategoryCode> codes;
    Eigen::MatrixXd matrix; // n x d
    std::vector<bool> mask;

    Eigen::Index dim() const { return matrix.cols(); }
    std::size_t size() const { return codes.size(); }
    std::vector<CategoryCode> uncovered() const;
};

CategoryVectorSet build_category_vectors(const Taxonomy& taxonomy,
                                         const VectorTable& table);

enum class NormalizeStep { unit, center };

// Parses a comma-separated list like "unit,center,unit".
std::vector<NormalizeStep> parse_normalize_steps(const std::string& spec);

// Applies the steps in order. `unit` scales each nonzero row to Euclidean
// norm 1; `center` subtracts the column mean.
Eigen::MatrixXd normalize(const Eigen::MatrixXd& matrix,
                          const std::vector<NormalizeStep>& steps);

// Sphering: transform = (X^T X + eps I)^(-1/2) via symmetric
// eigendecomposition; whitened = X * transform.
struct WhitenResult {
    Eigen::MatrixXd whitened;
    Eigen::MatrixXd transform; // d x d
};
WhitenResult whiten(const Eigen::MatrixXd& matrix, double epsilon = 0.0);

// Column-centered projection on the top-k right singular vectors. Component
// signs are fixed so each component's largest-magnitude entry is positive.
struct PcaResult {
    Eigen::MatrixXd coords;             // n x k
    Eigen::MatrixXd components;         // d x k
    Eigen::VectorXd explained_variance; // k, non-increasing
    Eigen::RowVectorXd mean;            // 1 x d
};
PcaResult pca_project(const Eigen::MatrixXd& matrix, int k);

} // namespace taxalign
