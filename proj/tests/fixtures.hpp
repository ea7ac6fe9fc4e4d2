#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

namespace fixtures {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols,
                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    }
    return m;
}

// Orthogonal matrix from the QR factorization of a seeded Gaussian matrix,
// with the sign convention R_ii > 0 so the result is unique.
inline Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::uint64_t seed) {
    Eigen::MatrixXd g = gaussian(d, d, seed);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < d; ++i) {
        if (r(i, i) < 0) q.col(i) = -q.col(i);
    }
    return q;
}

// Source cloud X and its rotated (optionally noisy) clone Y = X R^T + noise.
// Ground truth: row i of X corresponds to row i of Y.
struct RotatedClone {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;
    Eigen::MatrixXd R;
};

inline RotatedClone rotated_clone(Eigen::Index n, Eigen::Index d,
                                  double noise_scale, std::uint64_t seed) {
    RotatedClone fixture;
    fixture.X = gaussian(n, d, seed);
    for (Eigen::Index i = 0; i < n; ++i) fixture.X.row(i).normalize();
    fixture.R = random_orthogonal(d, seed + 1);
    fixture.Y = fixture.X * fixture.R.transpose();
    if (noise_scale > 0.0) {
        fixture.Y += noise_scale * gaussian(n, d, seed + 2);
        for (Eigen::Index i = 0; i < n; ++i) fixture.Y.row(i).normalize();
    }
    return fixture;
}

// Fraction of sources whose matched target row equals the identity pairing.
template <typename Pairs>
inline double precision_at_1(const Pairs& pairs) {
    if (pairs.empty()) return 0.0;
    long hits = 0;
    for (const auto& [s, t] : pairs) {
        if (s == t) ++hits;
    }
    return static_cast<double>(hits) / pairs.size();
}

class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int attempt = 0;; ++attempt) {
            path_ = base / ("taxalign_test_" + std::to_string(::getpid()) +
                            "_" + std::to_string(counter()++));
            if (std::filesystem::create_directory(path_)) break;
            if (attempt > 100) throw std::runtime_error("cannot create tempdir");
        }
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const {
        return (path_ / name).string();
    }
    std::string write(const std::string& name, const std::string& content) const {
        std::string p = file(name);
        std::ofstream out(p);
        out << content;
        return p;
    }
    const std::filesystem::path& path() const { return path_; }

private:
    static int& counter() {
        static int value = 0;
        return value;
    }
    std::filesystem::path path_;
};

} // namespace fixtures
