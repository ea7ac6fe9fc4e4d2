#include "taxalign/csls.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace taxalign {

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double na = a.norm();
    double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        throw NumericalError("cosine of a zero vector is undefined");
    }
    return a.dot(b) / (na * nb);
}

Eigen::MatrixXd unit_rows(const Eigen::MatrixXd& matrix) {
    Eigen::MatrixXd out = matrix;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        double norm = out.row(i).norm();
        if (norm > 0.0) out.row(i) /= norm;
    }
    return out;
}

namespace {

std::vector<Neighborhood> knn_one_direction(const Eigen::MatrixXd& queries,
                                            const Eigen::MatrixXd& keys,
                                            int k) {
    std::vector<Neighborhood> result(queries.rows());
    std::vector<Eigen::Index> order(keys.rows());
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        Eigen::VectorXd cosines = keys * queries.row(i).transpose();
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        // Ties broken by lowest index for determinism.
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](Eigen::Index a, Eigen::Index b) {
                              if (cosines(a) != cosines(b)) {
                                  return cosines(a) > cosines(b);
                              }
                              return a < b;
                          });
        Neighborhood& nb = result[i];
        nb.row = i;
        nb.neighbors.assign(order.begin(), order.begin() + k);
        double sum = 0.0;
        for (Eigen::Index j : nb.neighbors) sum += cosines(j);
        nb.mean_cos = sum / k;
    }
    return result;
}

} // namespace

Neighborhoods build_neighborhoods(const Eigen::MatrixXd& source,
                                  const Eigen::MatrixXd& target, int k) {
    if (k < 1) throw ConfigError("build_neighborhoods: k must be >= 1");
    if (k > source.rows() || k > target.rows()) {
        throw ConfigError("build_neighborhoods: k=" + std::to_string(k) +
                          " exceeds space size");
    }
    Eigen::MatrixXd src_unit = unit_rows(source);
    Eigen::MatrixXd tgt_unit = unit_rows(target);
    Neighborhoods result;
    result.k = k;
    result.source = knn_one_direction(src_unit, tgt_unit, k);
    result.target = knn_one_direction(tgt_unit, src_unit, k);
    return result;
}

double csls_score(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Neighborhood& nx, const Neighborhood& ny) {
    return 2.0 * cosine(x, y) - nx.mean_cos - ny.mean_cos;
}

} // namespace taxalign
