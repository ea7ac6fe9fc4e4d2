#pragma once

#include <Eigen/Dense>
#include <vector>

#include "taxalign/error.hpp"

namespace taxalign {

enum class Scorer { cosine, csls };

// k nearest neighbors of one row in the opposite space, by cosine.
struct Neighborhood {
    Eigen::Index row = 0;
    std::vector<Eigen::Index> neighbors; // sorted by descending cosine
    double mean_cos = 0.0;
};

struct Neighborhoods {
    std::vector<Neighborhood> source; // source rows vs target space
    std::vector<Neighborhood> target; // target rows vs source space
    int k = 0;
};

// Exact brute-force k-NN by cosine in both directions.
Neighborhoods build_neighborhoods(const Eigen::MatrixXd& source,
                                  const Eigen::MatrixXd& target, int k);

// CSLS(x, y) = 2 cos(x, y) - mean_cos(x) - mean_cos(y).
double csls_score(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Neighborhood& nx, const Neighborhood& ny);

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Rows scaled to unit norm; zero rows left untouched.
Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& matrix);

} // namespace taxalign
