#include "taxalign/embeddings.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <sstream>

namespace taxalign {

namespace {

// --- minimal UTF-8 handling for the tokenizer -----------------------------

struct Codepoint {
    char32_t value;
    int bytes;
};

Codepoint decode_utf8(const std::string& s, std::size_t i) {
    unsigned char c = s[i];
    if (c < 0x80) return {c, 1};
    auto cont = [&](std::size_t j) -> char32_t {
        if (j >= s.size()) return 0;
        return static_cast<unsigned char>(s[j]) & 0x3F;
    };
    if ((c >> 5) == 0x6 && i + 1 < s.size()) {
        return {static_cast<char32_t>((c & 0x1F) << 6 | cont(i + 1)), 2};
    }
    if ((c >> 4) == 0xE && i + 2 < s.size()) {
        return {static_cast<char32_t>((c & 0x0F) << 12 | cont(i + 1) << 6 |
                                      cont(i + 2)),
                3};
    }
    if ((c >> 3) == 0x1E && i + 3 < s.size()) {
        return {static_cast<char32_t>((c & 0x07) << 18 | cont(i + 1) << 12 |
                                      cont(i + 2) << 6 | cont(i + 3)),
                4};
    }
    return {0xFFFD, 1}; // invalid byte, treated as a separator
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_alnum(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
               (cp >= 'A' && cp <= 'Z');
    }
    // Latin-1 supplement letters (excluding x d7 and x f7 operators).
    if (cp >= 0x00C0 && cp <= 0x00FF) return cp != 0x00D7 && cp != 0x00F7;
    if (cp >= 0x0100 && cp <= 0x024F) return true; // Latin extended
    if (cp >= 0x0370 && cp <= 0x03FF) return cp != 0x0374 && cp != 0x0375;
    if (cp >= 0x0400 && cp <= 0x052F) return true; // Cyrillic + supplement
    if (cp >= 0x2DE0 && cp <= 0x2DFF) return true; // Cyrillic extended-A
    if (cp >= 0xA640 && cp <= 0xA69F) return true; // Cyrillic extended-B
    return false;
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
    if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;  // А..Я
    if (cp >= 0x0400 && cp <= 0x040F) return cp + 0x50;  // Ѐ..Џ (incl. Ё)
    if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) return cp + 0x20;
    // Latin extended and the rarer Cyrillic blocks alternate upper/lower.
    if ((cp >= 0x0100 && cp <= 0x024F) || (cp >= 0x0460 && cp <= 0x052F)) {
        if (cp % 2 == 0) return cp + 1;
    }
    return cp;
}

} // namespace

// --- VectorTable ----------------------------------------------------------

Eigen::Index VectorTable::row_of(const std::string& token) const {
    auto it = index.find(token);
    if (it == index.end()) throw DataError("token '" + token + "' not in table");
    return it->second;
}

VectorTable VectorTable::from_rows(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& rows) {
    VectorTable table;
    if (rows.empty()) return table;
    Eigen::Index d = rows.front().second.size();
    std::vector<const Eigen::VectorXd*> kept;
    for (const auto& [token, vec] : rows) {
        if (vec.size() != d) {
            throw DataError("vector for '" + token + "' has dimension " +
                            std::to_string(vec.size()) + ", expected " +
                            std::to_string(d));
        }
        if (table.index.count(token)) {
            ++table.duplicates_dropped;
            continue;
        }
        table.index.emplace(token, static_cast<Eigen::Index>(kept.size()));
        table.tokens.push_back(token);
        kept.push_back(&vec);
    }
    table.matrix.resize(static_cast<Eigen::Index>(kept.size()), d);
    for (Eigen::Index i = 0; i < table.matrix.rows(); ++i) {
        table.matrix.row(i) = kept[i]->transpose();
    }
    return table;
}

VectorTable load_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vector file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    std::istringstream header(line);
    long count = 0, dim = 0;
    if (!(header >> count >> dim) || count < 0 || dim <= 0) {
        throw DataError(path + ":1: expected 'count dim' header");
    }

    std::vector<std::pair<std::string, Eigen::VectorXd>> rows;
    rows.reserve(count);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        Eigen::VectorXd vec(dim);
        for (long j = 0; j < dim; ++j) {
            if (!(ss >> vec(j))) {
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": expected " + std::to_string(dim) +
                                " numeric components for '" + token + "'");
            }
        }
        double extra;
        if (ss >> extra) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": more than " + std::to_string(dim) +
                            " components for '" + token + "'");
        }
        if (!vec.allFinite()) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": non-finite component for '" + token + "'");
        }
        rows.emplace_back(std::move(token), std::move(vec));
    }
    return VectorTable::from_rows(rows);
}

void save_vectors(const VectorTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << table.size() << ' ' << table.dim() << '\n';
    out.precision(9);
    for (Eigen::Index i = 0; i < table.size(); ++i) {
        out << table.tokens[i];
        for (Eigen::Index j = 0; j < table.dim(); ++j) {
            out << ' ' << table.matrix(i, j);
        }
        out << '\n';
    }
}

// --- tokenizer ------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        Codepoint cp = decode_utf8(text, i);
        if (is_alnum(cp.value)) {
            encode_utf8(to_lower(cp.value), current);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        i += cp.bytes;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// --- category vectors -----------------------------------------------------

AveragedVector average_tokens(const std::vector<std::string>& tokens,
                              const VectorTable& table) {
    AveragedVector result;
    result.vector = Eigen::VectorXd::Zero(table.dim());
    long hits = 0;
    for (const auto& token : tokens) {
        auto it = table.index.find(token);
        if (it == table.index.end()) continue;
        result.vector += table.matrix.row(it->second).transpose();
        ++hits;
    }
    if (hits > 0) {
        result.vector /= static_cast<double>(hits);
        result.covered = true;
    }
    return result;
}

std::vector<CategoryCode> CategoryVectorSet::uncovered() const {
    std::vector<CategoryCode> out;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (!mask[i]) out.push_back(codes[i]);
    }
    return out;
}

CategoryVectorSet build_category_vectors(const Taxonomy& taxonomy,
                                         const VectorTable& table) {
    CategoryVectorSet set;
    set.scheme = taxonomy.scheme().id;
    set.codes = taxonomy.codes();
    set.matrix.resize(static_cast<Eigen::Index>(set.codes.size()), table.dim());
    set.mask.resize(set.codes.size());
    for (std::size_t i = 0; i < set.codes.size(); ++i) {
        auto avg = average_tokens(tokenize(taxonomy.at(set.codes[i]).description),
                                  table);
        set.matrix.row(static_cast<Eigen::Index>(i)) = avg.vector.transpose();
        set.mask[i] = avg.covered;
    }
    return set;
}

// --- linear-algebra transforms --------------------------------------------

std::vector<NormalizeStep> parse_normalize_steps(const std::string& spec) {
    std::vector<NormalizeStep> steps;
    std::istringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "unit") {
            steps.push_back(NormalizeStep::unit);
        } else if (item == "center") {
            steps.push_back(NormalizeStep::center);
        } else if (!item.empty()) {
            throw ConfigError("unknown normalization step '" + item + "'");
        }
    }
    return steps;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd& matrix,
                          const std::vector<NormalizeStep>& steps) {
    if (steps.empty()) throw ConfigError("normalize: empty step list");
    Eigen::MatrixXd out = matrix;
    for (NormalizeStep step : steps) {
        switch (step) {
        case NormalizeStep::unit:
            for (Eigen::Index i = 0; i < out.rows(); ++i) {
                double norm = out.row(i).norm();
                if (norm > 0.0) out.row(i) /= norm;
            }
            break;
        case NormalizeStep::center:
            out.rowwise() -= out.colwise().mean();
            break;
        }
    }
    return out;
}

WhitenResult whiten(const Eigen::MatrixXd& matrix, double epsilon) {
    if (epsilon < 0.0) throw ConfigError("whiten: epsilon must be >= 0");
    Eigen::Index d = matrix.cols();
    Eigen::MatrixXd gram = matrix.transpose() * matrix;
    gram.diagonal().array() += epsilon;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("whiten: eigendecomposition failed");
    }
    const Eigen::VectorXd& values = eig.eigenvalues();
    double max_value = values(d - 1);
    if (values(0) <= max_value * 1e-12) {
        throw NumericalError(
            "whiten: X^T X is rank-deficient; pass epsilon > 0");
    }
    Eigen::VectorXd inv_sqrt = values.array().rsqrt();
    WhitenResult result;
    result.transform =
        eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    result.whitened = matrix * result.transform;
    return result;
}

PcaResult pca_project(const Eigen::MatrixXd& matrix, int k) {
    Eigen::Index n = matrix.rows();
    Eigen::Index d = matrix.cols();
    if (n < 2) throw DataError("pca_project: need at least 2 rows");
    if (k < 1 || k > d) {
        throw ConfigError("pca_project: k=" + std::to_string(k) +
                          " out of range [1, " + std::to_string(d) + "]");
    }

    PcaResult result;
    result.mean = matrix.colwise().mean();
    Eigen::MatrixXd centered = matrix.rowwise() - result.mean;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    result.components = svd.matrixV().leftCols(k);
    result.explained_variance.resize(k);
    for (int j = 0; j < k; ++j) {
        double sigma = svd.singularValues()(j);
        result.explained_variance(j) = sigma * sigma / static_cast<double>(n - 1);
        // Sign convention: largest-magnitude entry of each component positive.
        Eigen::Index argmax;
        result.components.col(j).cwiseAbs().maxCoeff(&argmax);
        if (result.components(argmax, j) < 0.0) {
            result.components.col(j) = -result.components.col(j);
        }
    }
    result.coords = centered * result.components;
    return result;
}

} // namespace taxalign
