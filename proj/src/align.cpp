#include "taxalign/align.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace taxalign {

namespace {

void check_dict(const SeedDictionary& dict, Eigen::Index n, Eigen::Index m) {
    if (dict.pairs.empty()) throw DataError("empty seed dictionary");
    if (!dict.weights.empty() && dict.weights.size() != dict.pairs.size()) {
        throw DataError("seed dictionary: weight count mismatch");
    }
    for (const auto& [s, t] : dict.pairs) {
        if (s < 0 || s >= n || t < 0 || t >= m) {
            throw DataError("seed dictionary: row index out of range");
        }
    }
}

std::vector<Eigen::Index> nonzero_rows(const Eigen::MatrixXd& m) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (m.row(i).norm() > 0.0) rows.push_back(i);
    }
    return rows;
}

void check_orthogonal(const Eigen::MatrixXd& W) {
    Eigen::MatrixXd gram = W.transpose() * W;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-8) {
        throw NumericalError("mapping matrix is not orthogonal");
    }
}

// Forward induction plus per-pair scores, shared by induce_dictionary,
// refine and mean_csls_score.
struct Induction {
    SeedDictionary dict;
    std::vector<double> scores;
    double mean_score = 0.0;
};

Induction induce_forward(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         Scorer scorer, int csls_k) {
    auto src_rows = nonzero_rows(X);
    auto tgt_rows = nonzero_rows(Y);
    if (src_rows.empty() || tgt_rows.empty()) {
        throw DataError("induce_dictionary: no usable rows");
    }

    Eigen::MatrixXd Xu = unit_rows(X);
    Eigen::MatrixXd Yu = unit_rows(Y);
    Eigen::MatrixXd Xs(static_cast<Eigen::Index>(src_rows.size()), X.cols());
    Eigen::MatrixXd Ys(static_cast<Eigen::Index>(tgt_rows.size()), Y.cols());
    for (std::size_t i = 0; i < src_rows.size(); ++i) Xs.row(i) = Xu.row(src_rows[i]);
    for (std::size_t j = 0; j < tgt_rows.size(); ++j) Ys.row(j) = Yu.row(tgt_rows[j]);

    Eigen::MatrixXd cos = Xs * Ys.transpose();

    Eigen::VectorXd r_src = Eigen::VectorXd::Zero(Xs.rows());
    Eigen::VectorXd r_tgt = Eigen::VectorXd::Zero(Ys.rows());
    if (scorer == Scorer::csls) {
        int k = std::min<Eigen::Index>(csls_k,
                                       std::min(Xs.rows(), Ys.rows()));
        Neighborhoods nb = build_neighborhoods(Xs, Ys, k);
        for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
            r_src(i) = nb.source[i].mean_cos;
        }
        for (Eigen::Index j = 0; j < Ys.rows(); ++j) {
            r_tgt(j) = nb.target[j].mean_cos;
        }
    }

    Induction result;
    double total = 0.0;
    for (Eigen::Index i = 0; i < Xs.rows(); ++i) {
        Eigen::Index best = 0;
        double best_score = -1e300;
        for (Eigen::Index j = 0; j < Ys.rows(); ++j) {
            double score = scorer == Scorer::csls
                               ? 2.0 * cos(i, j) - r_src(i) - r_tgt(j)
                               : cos(i, j);
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        result.dict.pairs.emplace_back(src_rows[i], tgt_rows[best]);
        result.scores.push_back(best_score);
        total += best_score;
    }
    result.mean_score = total / static_cast<double>(Xs.rows());
    return result;
}

} // namespace

MappingMatrix procrustes_solve(const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Y,
                               const SeedDictionary& dict) {
    check_dict(dict, X.rows(), Y.rows());
    Eigen::Index d = X.cols();
    if (Y.cols() != d) throw DataError("procrustes_solve: dimension mismatch");

    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t p = 0; p < dict.size(); ++p) {
        const auto& [s, t] = dict.pairs[p];
        cross.noalias() +=
            dict.weight(p) * Y.row(t).transpose() * X.row(s);
    }
    if (cross.cwiseAbs().maxCoeff() == 0.0) {
        throw NumericalError("procrustes_solve: all-zero cross-covariance");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    MappingMatrix mapping;
    mapping.W = svd.matrixU() * svd.matrixV().transpose();
    mapping.method = "procrustes";
    mapping.iterations = 1;
    check_orthogonal(mapping.W);
    return mapping;
}

VecmapResult vecmap_transform(const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Y,
                              const SeedDictionary& dict) {
    check_dict(dict, X.rows(), Y.rows());
    Eigen::Index d = X.cols();
    if (Y.cols() != d) throw DataError("vecmap_transform: dimension mismatch");

    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t p = 0; p < dict.size(); ++p) {
        const auto& [s, t] = dict.pairs[p];
        cross.noalias() +=
            dict.weight(p) * X.row(s).transpose() * Y.row(t);
    }
    if (cross.cwiseAbs().maxCoeff() == 0.0) {
        throw NumericalError("vecmap_transform: all-zero cross-covariance");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    VecmapResult result;
    result.X = X * svd.matrixU();
    result.Y = Y * svd.matrixV();
    return result;
}

SeedDictionary induce_dictionary(const Eigen::MatrixXd& X,
                                 const Eigen::MatrixXd& Y, Scorer scorer,
                                 InductionMode mode, int csls_k) {
    if (X.cols() != Y.cols()) {
        throw DataError("induce_dictionary: dimension mismatch");
    }
    Induction forward = induce_forward(X, Y, scorer, csls_k);
    if (mode == InductionMode::forward) return forward.dict;

    // Mutual: keep pairs that are each other's argmax.
    Induction backward = induce_forward(Y, X, scorer, csls_k);
    std::map<Eigen::Index, Eigen::Index> back;
    for (const auto& [t, s] : backward.dict.pairs) back[t] = s;
    SeedDictionary mutual;
    for (const auto& [s, t] : forward.dict.pairs) {
        auto it = back.find(t);
        if (it != back.end() && it->second == s) mutual.pairs.emplace_back(s, t);
    }
    return mutual;
}

double mean_csls_score(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const Eigen::MatrixXd& W, int csls_k) {
    return induce_forward(X * W.transpose(), Y, Scorer::csls, csls_k)
        .mean_score;
}

MappingMatrix refine(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                     const SeedDictionary& seed, const AlignmentConfig& cfg) {
    if (cfg.refinement_iterations < 1) {
        throw ConfigError("refine: refinement_iterations must be >= 1");
    }

    SeedDictionary dict = seed;
    MappingMatrix best;
    double best_score = -1e300;
    std::vector<double> history;
    double prev_score = -1e300;
    int rounds = 0;

    for (int round = 0; round < cfg.refinement_iterations; ++round) {
        MappingMatrix current = procrustes_solve(X, Y, dict);
        ++rounds;
        Induction induced = induce_forward(X * current.W.transpose(), Y,
                                           Scorer::csls, cfg.csls_k);
        history.push_back(induced.mean_score);
        if (induced.mean_score > best_score) {
            best_score = induced.mean_score;
            best = current;
        }
        if (round > 0 && induced.mean_score - prev_score < cfg.convergence_tol) {
            break;
        }
        prev_score = induced.mean_score;
        dict = induced.dict;
    }

    best.method = "refine";
    best.iterations = rounds;
    best.objective_history = history;
    return best;
}

MappingMatrix self_learn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                         const AlignmentConfig& cfg) {
    auto src_rows = nonzero_rows(X);
    auto tgt_rows = nonzero_rows(Y);
    if (static_cast<int>(src_rows.size()) < 2 * cfg.csls_k ||
        static_cast<int>(tgt_rows.size()) < 2 * cfg.csls_k) {
        throw DataError("self_learn: need at least 2*csls_k usable rows");
    }

    // Sorted intra-space similarity profiles. Rows whose neighborhood
    // structure looks alike across spaces are paired as the initial guess.
    Eigen::MatrixXd Xu = unit_rows(X);
    Eigen::MatrixXd Yu = unit_rows(Y);
    auto profiles = [](const Eigen::MatrixXd& U,
                       const std::vector<Eigen::Index>& rows,
                       Eigen::Index width) {
        Eigen::MatrixXd sims(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows.size(); ++j) {
                sims(i, j) = U.row(rows[i]).dot(U.row(rows[j]));
            }
        }
        Eigen::MatrixXd out(sims.rows(), width);
        std::vector<double> row(rows.size());
        for (Eigen::Index i = 0; i < sims.rows(); ++i) {
            for (std::size_t j = 0; j < rows.size(); ++j) row[j] = sims(i, j);
            std::sort(row.begin(), row.end(), std::greater<double>());
            for (Eigen::Index j = 0; j < width; ++j) out(i, j) = row[j];
        }
        return out;
    };
    Eigen::Index width = static_cast<Eigen::Index>(
        std::min(src_rows.size(), tgt_rows.size()));
    Eigen::MatrixXd src_profiles = profiles(Xu, src_rows, width);
    Eigen::MatrixXd tgt_profiles = profiles(Yu, tgt_rows, width);

    SeedDictionary init;
    for (Eigen::Index i = 0; i < src_profiles.rows(); ++i) {
        Eigen::Index best = 0;
        double best_dist = 1e300;
        for (Eigen::Index j = 0; j < tgt_profiles.rows(); ++j) {
            double dist = (src_profiles.row(i) - tgt_profiles.row(j)).norm();
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        init.pairs.emplace_back(src_rows[i], tgt_rows[best]);
    }

    MappingMatrix best;
    double best_score = -1e300;
    for (int restart = 0; restart < std::max(cfg.restarts, 1); ++restart) {
        SeedDictionary dict;
        if (restart == 0) {
            dict = init;
        } else {
            // Seeded subsample of the initial pairs.
            std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(restart));
            std::bernoulli_distribution keep(0.5);
            for (const auto& pair : init.pairs) {
                if (keep(rng)) dict.pairs.push_back(pair);
            }
            if (dict.pairs.size() < 2) dict = init;
        }
        MappingMatrix candidate = refine(X, Y, dict, cfg);
        double score = mean_csls_score(X, Y, candidate.W, cfg.csls_k);
        if (score > best_score) {
            best_score = score;
            best = candidate;
        }
    }
    best.method = "self-learn";
    return best;
}

void save_mapping(const MappingMatrix& mapping, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "# method " << mapping.method << '\n';
    out << "# iterations " << mapping.iterations << '\n';
    out << "# scores";
    out.precision(17);
    for (double score : mapping.objective_history) out << ' ' << score;
    out << '\n';
    out << mapping.W.rows() << ' ' << mapping.W.cols() << '\n';
    for (Eigen::Index i = 0; i < mapping.W.rows(); ++i) {
        for (Eigen::Index j = 0; j < mapping.W.cols(); ++j) {
            if (j) out << ' ';
            out << mapping.W(i, j);
        }
        out << '\n';
    }
}

MappingMatrix load_mapping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mapping file '" + path + "'");
    MappingMatrix mapping;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("# method ", 0) == 0) {
            mapping.method = line.substr(9);
        } else if (line.rfind("# iterations ", 0) == 0) {
            mapping.iterations = std::stoi(line.substr(13));
        } else if (line.rfind("# scores", 0) == 0) {
            std::istringstream ss(line.substr(8));
            double v;
            while (ss >> v) mapping.objective_history.push_back(v);
        } else if (!line.empty() && line[0] != '#') {
            std::istringstream ss(line);
            Eigen::Index rows, cols;
            if (!(ss >> rows >> cols)) {
                throw DataError(path + ": expected matrix dimensions");
            }
            mapping.W.resize(rows, cols);
            for (Eigen::Index i = 0; i < rows; ++i) {
                if (!std::getline(in, line)) {
                    throw DataError(path + ": truncated matrix");
                }
                std::istringstream row(line);
                for (Eigen::Index j = 0; j < cols; ++j) {
                    if (!(row >> mapping.W(i, j))) {
                        throw DataError(path + ": malformed matrix row");
                    }
                }
            }
            break;
        }
    }
    if (mapping.W.size() == 0) throw DataError(path + ": no matrix found");
    return mapping;
}

SeedDictionary load_seed_dictionary(const std::string& path,
                                    const CategoryVectorSet& source,
                                    const CategoryVectorSet& target) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dictionary file '" + path + "'");

    std::map<std::vector<std::string>, Eigen::Index> src_index, tgt_index;
    for (std::size_t i = 0; i < source.codes.size(); ++i) {
        src_index[source.codes[i].segments] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t j = 0; j < target.codes.size(); ++j) {
        tgt_index[target.codes[j].segments] = static_cast<Eigen::Index>(j);
    }

    SeedDictionary dict;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected 'source_code<TAB>target_code'");
        }
        // Codes may use either separator; split on both.
        auto segment = [](std::string text) {
            std::vector<std::string> segs;
            std::string current;
            for (char c : text) {
                if (c == '.' || c == '-') {
                    if (!current.empty()) segs.push_back(std::move(current));
                    current.clear();
                } else if (!std::isspace(static_cast<unsigned char>(c))) {
                    current += c;
                }
            }
            if (!current.empty()) segs.push_back(std::move(current));
            return segs;
        };
        auto src_it = src_index.find(segment(line.substr(0, tab)));
        auto tgt_it = tgt_index.find(segment(line.substr(tab + 1)));
        if (src_it == src_index.end() || tgt_it == tgt_index.end()) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": unknown category code");
        }
        dict.pairs.emplace_back(src_it->second, tgt_it->second);
    }
    if (dict.pairs.empty()) throw DataError(path + ": empty dictionary");
    return dict;
}

} // namespace taxalign
